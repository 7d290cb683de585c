use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use iondd::chain::normal_modes;
use iondd::experiments::{emit_all, run_scenario, summarize, Context, OutputFormat, Scenario};
use iondd::units::to_hz;
use iondd::{par, Error, Result};

#[derive(Parser)]
#[command(name = "iondd", version, about = "Trapped-ion gates under phase-adaptive dynamical decoupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its result tables.
    Run {
        scenario: PathBuf,
        /// Scenario profile (`desk` is the base document).
        #[arg(long)]
        profile: Option<String>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or jsonl.
        #[arg(long)]
        format: Option<OutputFormat>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Record per-row wall-clock times.
        #[arg(long)]
        timing: bool,
    },
    /// Print normal-mode frequencies and participation vectors of an N-ion chain.
    Modes { n: usize },
    /// Print the gate time, XY8 spacing and corrected final time of a scenario.
    SolveTfw {
        scenario: PathBuf,
        #[arg(long)]
        profile: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, profile, seed, out, format, threads, timing } => {
            let mut s = Scenario::from_file(&scenario, profile.as_deref())?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(dir) = out {
                s.output.dir = dir;
            }
            if let Some(f) = format {
                s.output.format = f;
            }
            s.output.record_timing |= timing;
            let output = par::with_threads(threads, || run_scenario(&s))??;
            let paths = emit_all(&output, &s.name, &s.output.dir, s.output.format)?;
            for (t, p) in output.tables.iter().zip(&paths) {
                let sum = summarize(t);
                println!(
                    "{:<24} rows {:>5}  mean F {:.6}  min F {:.6}  -> {}",
                    sum.table,
                    sum.rows,
                    sum.mean_fidelity,
                    sum.min_fidelity,
                    p.display()
                );
            }
            for m in &output.regions {
                let imp = m.improvement_pct.map_or("n/a".to_string(), |x| format!("{x:+.1}%"));
                println!("region > 99.9%  {:<16} {:>4}/{:<4} vs fixed {imp}", m.policy, m.region_count, m.grid_points);
            }
            Ok(())
        }
        Command::Modes { n } => {
            let modes = normal_modes(n)?;
            println!("# {n}-ion chain: frequencies in units of the trap frequency, b_jm by ion (rows) and mode (columns)");
            println!("{:>6} {:>12}", "mode", "nu_m/nu");
            for (m, f) in modes.freqs.iter().enumerate() {
                println!("{:>6} {:>12.6}", m + 1, f);
            }
            println!();
            print!("{:>6}", "ion");
            for m in 0..modes.n_modes() {
                print!(" {:>10}", format!("b_j{}", m + 1));
            }
            println!(" {:>12}", "position");
            for j in 0..modes.n_ions() {
                print!("{:>6}", j + 1);
                for m in 0..modes.n_modes() {
                    print!(" {:>10.6}", modes.bmat[(j, m)]);
                }
                println!(" {:>12.6}", modes.positions[j]);
            }
            Ok(())
        }
        Command::SolveTfw { scenario, profile } => {
            let s = Scenario::from_file(&scenario, profile.as_deref())?;
            let ctx = Context::new(&s)?;
            println!("t_G   = {:.6} ms", ctx.t_gate * 1e3);
            let counts = if s.sequence.pulse_counts.is_empty() { vec![8 * s.sequence.blocks] } else { s.sequence.pulse_counts.clone() };
            let rabis = if s.sequence.rabi_sweep_hz.is_empty() { vec![s.rabi()] } else { s.rabi_sweep() };
            for &count in &counts {
                for &rabi in &rabis {
                    if count % 8 != 0 {
                        return Err(Error::invalid(format!("pulse count {count} is not a multiple of 8")));
                    }
                    let sp = ctx.spacing(&s, count / 8, rabi)?;
                    println!(
                        "pulses {count:>3}  Omega = 2pi x {:>8.3} kHz  tau = {:.4} us  t_FW = {:.6} ms",
                        to_hz(rabi) * 1e-3,
                        sp.tau * 1e6,
                        sp.t_fw * 1e3
                    );
                }
            }
            Ok(())
        }
    }
}
