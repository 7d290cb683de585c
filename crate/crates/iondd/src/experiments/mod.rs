//! Scenario-driven sweeps: fidelity versus static qubit shift, versus pulse
//! count and Rabi frequency, and robustness maps over (ε, δΩ) for several
//! block-phase policies.
//!
//! Every run is determined by the scenario and its master seed: realization
//! `r` uses the phase-schedule seed `derive_seed(master, [r])` for every
//! grid point and policy, so tables of different policies are directly
//! comparable. Grid points run in parallel; rows are sorted afterwards.

pub mod metrics;
pub mod scenario;
pub mod table;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use metrics::{region_metrics, RegionMetric, REGION_THRESHOLD};
pub use scenario::{ExperimentKind, Grid, OutputFormat, Scenario, Tier, Variant};
pub use table::{emit_results, output_path, read_results, ResultTable, Row};

use crate::analytic::{displacement_amplitudes, pure_target_fidelity, residual_density_matrix};
use crate::chain::{gate_time, CouplingMatrix, GateKind};
use crate::engine::target::{local_phases, with_local_phases};
use crate::engine::thermal::{cutoff_for_tail, thermal_state};
use crate::engine::{
    evolve_lindblad, spin_fidelity, target_state, thermal_run, HilbertSpec, IonSystem, LindbladOptions, NoiseModel,
    PropagatorOptions, QuantumState, SequencePropagator, StateData, TargetKind, ThermalMixture,
};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMatrix, CVector};
use crate::modulation::{solve_spacing, Spacing};
use crate::par;
use crate::pulses::{build_xy8_sequence, make_phase_schedule, PhasePolicy, PulseSequence};
use crate::rng::derive_seed;
use crate::spin;

/// Everything a sweep needs that does not depend on the grid point.
#[derive(Debug, Clone)]
pub struct Context {
    pub system: IonSystem,
    pub coupling: CouplingMatrix,
    /// Ideal gate time t_G.
    pub t_gate: f64,
    pub target_kind: TargetKind,
    /// Ideal target at t_G, before local phases.
    pub target: CVector,
    pub mixture: ThermalMixture,
    pub spec: HilbertSpec,
    pub tier: Tier,
    heating_rates: Option<Vec<f64>>,
    temperature: f64,
}

impl Context {
    pub fn new(s: &Scenario) -> Result<Self> {
        let system = s.ion_system()?;
        let coupling = system.coupling()?;
        let t_gate = gate_time(&coupling, GateKind::Multi)?;
        let target_kind = s.target();
        let StateData::Pure(target) = target_state(&coupling, t_gate, target_kind)?.data else {
            unreachable!("targets are pure")
        };
        let k = system.n_modes();
        let nbar = vec![s.thermal.nbar; k];
        let tails: Vec<usize> = nbar.iter().map(|&n| cutoff_for_tail(n, 1e-6)).collect();
        let mut mixture = thermal_state(&nbar, &tails)?;
        if let Some(b) = s.thermal.branches {
            mixture = mixture.truncate(b);
        }
        let labels = mixture.max_labels();
        if let Some(&l) = labels.iter().find(|&&l| l > s.thermal.cutoff) {
            return Err(Error::invalid(format!(
                "thermal branches reach Fock label {l}, above thermal.cutoff = {}; raise the cutoff or set thermal.branches",
                s.thermal.cutoff
            )));
        }
        let spec = HilbertSpec::new(system.n_qubits(), vec![s.thermal.cutoff; k])?;
        Ok(Self {
            system,
            coupling,
            t_gate,
            target_kind,
            target,
            mixture,
            spec,
            tier: s.engine.tier,
            heating_rates: s.noise.heating_rates.clone(),
            temperature: s.noise.temperature_k,
        })
    }

    pub fn noise(&self, eps: f64, d_omega: f64) -> Result<NoiseModel> {
        let mut noise = NoiseModel { temperature: self.temperature, ..NoiseModel::static_errors(eps, d_omega) };
        if let Some(rates) = &self.heating_rates {
            noise = noise.with_heating_rates(rates, &self.system.modes.freqs)?;
        }
        Ok(noise)
    }

    /// XY8 spacing for `blocks` at Rabi frequency `rabi`, solved for the π/4
    /// pair phase unless the scenario fixes τ.
    pub fn spacing(&self, s: &Scenario, blocks: usize, rabi: f64) -> Result<Spacing> {
        match s.sequence.tau_s {
            Some(tau) => Ok(Spacing { tau, t_fw: (8 * blocks) as f64 * tau }),
            None => solve_spacing(blocks, rabi, &self.system.eta, &self.system.modes, &self.coupling, PI / 4.0, s.sequence.phase_model),
        }
    }

    /// Pure-state propagator for the Schrödinger tier.
    pub fn prepare(&self, noise: &NoiseModel, rabis: &[f64]) -> Result<Option<SequencePropagator<'_>>> {
        match self.tier {
            Tier::Schrodinger => {
                Ok(Some(SequencePropagator::prepare(&self.system, self.spec.clone(), noise, PropagatorOptions::default(), rabis)?))
            }
            _ => Ok(None),
        }
    }

    /// Gate fidelity after running `seq` (or free evolution) to `t_final`.
    pub fn fidelity(
        &self,
        noise: &NoiseModel,
        seq: Option<&PulseSequence>,
        t_final: f64,
        prop: Option<&SequencePropagator<'_>>,
    ) -> Result<f64> {
        let spin0 = spin::plus_state(self.system.n_qubits());
        let target = || with_local_phases(&self.target, &local_phases(&self.system, seq, t_final));
        match self.tier {
            Tier::Analytic => self.analytic_fidelity(noise, seq, t_final),
            Tier::Schrodinger => {
                let prop = prop.ok_or_else(|| Error::invalid("Schrödinger tier needs a prepared propagator"))?;
                let run = thermal_run(prop, seq, &self.mixture, &spin0, t_final)?;
                Ok(spin_fidelity(&run.rho_spin, &target()))
            }
            Tier::Lindblad => {
                let dm = self.spec.mode_dim();
                let mut rho = CMatrix::zeros(self.spec.dim(), self.spec.dim());
                for br in &self.mixture.branches {
                    let k = self.spec.fock_index(&br.fock)?;
                    for s in 0..self.spec.spin_dim() {
                        for sp in 0..self.spec.spin_dim() {
                            rho[(s * dm + k, sp * dm + k)] += spin0[s] * spin0[sp].conj() * br.weight;
                        }
                    }
                }
                let rho0 = QuantumState::mixed(self.spec.clone(), rho)?;
                let opts = LindbladOptions { max_dim: self.spec.dim().max(LindbladOptions::default().max_dim), ..Default::default() };
                let out = evolve_lindblad(&self.system, &rho0, seq, noise, t_final, &opts)?;
                Ok(spin_fidelity(&out.reduced_spin(), &target()))
            }
        }
    }

    /// Two-ion pulse-free fidelity from the closed-form reduced state with
    /// exact thermal moments; the static shift enters as a z rotation.
    fn analytic_fidelity(&self, noise: &NoiseModel, seq: Option<&PulseSequence>, t: f64) -> Result<f64> {
        if seq.is_some() || self.system.n_qubits() != 2 {
            return Err(Error::invalid("the analytic tier covers two-ion pulse-free evolution only"));
        }
        let alpha = displacement_amplitudes(&self.system.eta, &self.system.modes, t);
        let rho = residual_density_matrix(&alpha.ion(0), &alpha.ion(1), &self.mixture.nbar)?;
        let rho = CMatrix::from_fn(4, 4, |s, sp| {
            rho[(s, sp)] * cis(-0.5 * noise.eps * t * (spin::total_z(s, 2) - spin::total_z(sp, 2)))
        });
        Ok(pure_target_fidelity(&rho, &spin::bell_state()))
    }
}

/// What to run at each grid point: free evolution (`None`) or an XY8
/// sequence under each listed policy.
#[derive(Debug, Clone)]
pub struct Plan {
    pub rabi: f64,
    pub blocks: usize,
    pub tau: f64,
    pub t_final: f64,
    pub policies: Vec<Option<PhasePolicy>>,
}

/// Rows for every (point × seed), grouped per plan policy.
pub fn evaluate_grid(
    ctx: &Context,
    points: &[(f64, f64)],
    plan: &Plan,
    seeds: &[u64],
    record_timing: bool,
) -> Result<Vec<Vec<Row>>> {
    let pulsed = plan.policies.iter().any(|p| p.is_some());
    let per_point = par::try_map(points.to_vec(), |(eps, dom)| {
        let noise = ctx.noise(eps, dom)?;
        let rabis = if pulsed { vec![plan.rabi] } else { Vec::new() };
        let prop = ctx.prepare(&noise, &rabis)?;
        let mut out = Vec::with_capacity(plan.policies.len());
        for policy in &plan.policies {
            let mut rows = Vec::with_capacity(seeds.len());
            let mut cached: Option<(f64, f64)> = None;
            for &seed in seeds {
                let (f, ms) = match (policy, cached) {
                    (None, Some(hit)) => hit,
                    _ => {
                        let start = Instant::now();
                        let seq = match policy {
                            Some(p) => {
                                let sched = make_phase_schedule(plan.blocks, *p, seed)?;
                                Some(build_xy8_sequence(plan.blocks, plan.tau, plan.rabi, &sched)?)
                            }
                            None => None,
                        };
                        let f = ctx.fidelity(&noise, seq.as_ref(), plan.t_final, prop.as_ref())?;
                        let ms = if record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                        (f, ms)
                    }
                };
                if policy.is_none() {
                    cached = Some((f, ms));
                }
                rows.push(Row {
                    eps_rad_s: eps,
                    domega_rad_s: dom,
                    seed,
                    fidelity: f,
                    infidelity: 1.0 - f,
                    t_fw_s: plan.t_final,
                    wall_ms: ms,
                });
            }
            out.push(rows);
        }
        Ok(out)
    })?;
    let mut grouped = vec![Vec::new(); plan.policies.len()];
    for point in per_point {
        for (k, rows) in point.into_iter().enumerate() {
            grouped[k].extend(rows);
        }
    }
    Ok(grouped)
}

/// Result of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<ResultTable>,
    /// Robustness maps only.
    pub regions: Vec<RegionMetric>,
}

fn seeds(s: &Scenario) -> Vec<u64> {
    (0..s.noise.realizations as u64).map(|r| derive_seed(s.seed, &[r])).collect()
}

fn base_table(s: &Scenario, ctx: &Context, name: &str, seeds: &[u64]) -> ResultTable {
    let mut t = ResultTable::new(name);
    t.set_meta("code_version", env!("CARGO_PKG_VERSION"));
    t.set_meta("experiment", s.kind);
    t.set_meta("master_seed", s.seed);
    t.set_meta("seeds", seeds);
    t.set_meta("scenario", s.echo());
    t.set_meta("target", ctx.target_kind);
    t.set_meta("tier", ctx.tier);
    t.set_meta("t_gate_s", ctx.t_gate);
    t.set_meta("cutoffs", &ctx.spec.cutoffs);
    t.set_meta("thermal_branches", ctx.mixture.branches.len());
    t
}

fn set_sequence_meta(t: &mut ResultTable, plan: Option<&Plan>) {
    match plan {
        Some(p) => {
            t.set_meta("pulses", 8 * p.blocks);
            t.set_meta("rabi_rad_s", p.rabi);
            t.set_meta("tau_s", p.tau);
            t.set_meta("t_fw_s", p.t_final);
        }
        None => {
            t.set_meta("pulses", 0);
            t.set_meta("t_fw_s", serde_json::Value::Null);
        }
    }
}

fn finish(mut t: ResultTable, rows: Vec<Row>) -> ResultTable {
    t.rows = rows;
    t.sort();
    t
}

/// Fidelity versus static shift ε, pulse-free at t_G and pulsed at t_FW.
pub fn run_epsilon_sweep(s: &Scenario) -> Result<Vec<ResultTable>> {
    require(s, ExperimentKind::EpsilonSweep)?;
    let ctx = Context::new(s)?;
    let seeds = seeds(s);
    let points: Vec<(f64, f64)> = s.eps_grid().into_iter().map(|e| (e, 0.0)).collect();
    let mut tables = Vec::new();
    for &variant in &s.sequence.variants {
        let plan = match variant {
            Variant::PulseFree => {
                Plan { rabi: s.rabi(), blocks: s.sequence.blocks, tau: 0.0, t_final: ctx.t_gate, policies: vec![None] }
            }
            Variant::Pulsed => {
                let sp = ctx.spacing(s, s.sequence.blocks, s.rabi())?;
                Plan { rabi: s.rabi(), blocks: s.sequence.blocks, tau: sp.tau, t_final: sp.t_fw, policies: vec![Some(s.sequence.policy)] }
            }
        };
        let rows = evaluate_grid(&ctx, &points, &plan, &seeds, s.output.record_timing)?.remove(0);
        let mut t = base_table(s, &ctx, variant.name(), &seeds);
        t.set_meta("variant", variant);
        set_sequence_meta(&mut t, (variant == Variant::Pulsed).then_some(&plan));
        if variant == Variant::Pulsed {
            t.set_meta("policy", s.sequence.policy);
        }
        tables.push(finish(t, rows));
    }
    Ok(tables)
}

/// One table per (pulse count, Ω) with t_FW solved for each configuration.
pub fn run_pulse_count_study(s: &Scenario) -> Result<Vec<ResultTable>> {
    require(s, ExperimentKind::PulseCount)?;
    let ctx = Context::new(s)?;
    let seeds = seeds(s);
    let configs: Vec<(usize, f64)> =
        s.sequence.pulse_counts.iter().flat_map(|&n| s.rabi_sweep().into_iter().map(move |r| (n, r))).collect();
    let runs = par::try_map(configs, |(count, rabi)| {
        let blocks = count / 8;
        let sp = ctx.spacing(s, blocks, rabi)?;
        let plan = Plan { rabi, blocks, tau: sp.tau, t_final: sp.t_fw, policies: vec![Some(s.sequence.policy)] };
        let rows = evaluate_grid(&ctx, &[(0.0, 0.0)], &plan, &seeds, s.output.record_timing)?.remove(0);
        let name = format!("n{count}_rabi{}hz", fmt_hz(rabi));
        let mut t = base_table(s, &ctx, &name, &seeds);
        set_sequence_meta(&mut t, Some(&plan));
        t.set_meta("policy", s.sequence.policy);
        Ok(finish(t, rows))
    })?;
    Ok(runs)
}

fn fmt_hz(w: f64) -> String {
    let f = crate::units::to_hz(w);
    if (f - f.round()).abs() < 1e-6 {
        format!("{}", f.round() as i64)
    } else {
        format!("{f}")
    }
}

/// Mean-infidelity maps over (ε, δΩ) for each block-phase policy, with the
/// size of the > 99.9 % region compared against fixed phases.
pub fn run_robustness_map(s: &Scenario) -> Result<(Vec<ResultTable>, Vec<RegionMetric>)> {
    require(s, ExperimentKind::RobustnessMap)?;
    let ctx = Context::new(s)?;
    let seeds = seeds(s);
    let rabi = s.rabi();
    let sp = ctx.spacing(s, s.sequence.blocks, rabi)?;
    let policies = s.map_policies();
    let plan = Plan { rabi, blocks: s.sequence.blocks, tau: sp.tau, t_final: sp.t_fw, policies: policies.iter().map(|&p| Some(p)).collect() };
    let points: Vec<(f64, f64)> =
        s.eps_grid().into_iter().flat_map(|e| s.domega_grid(rabi).into_iter().map(move |d| (e, d))).collect();
    let grouped = evaluate_grid(&ctx, &points, &plan, &seeds, s.output.record_timing)?;
    let mut tables: Vec<ResultTable> = policies
        .iter()
        .zip(grouped)
        .map(|(p, rows)| {
            let mut t = base_table(s, &ctx, &p.to_string().replace(':', "-"), &seeds);
            set_sequence_meta(&mut t, Some(&plan));
            t.set_meta("policy", p);
            finish(t, rows)
        })
        .collect();
    let regions = region_metrics(&tables, &tables[0], REGION_THRESHOLD)?;
    for (t, m) in tables.iter_mut().zip(&regions) {
        t.set_meta("region_threshold", REGION_THRESHOLD);
        t.set_meta("region_count", m.region_count);
        t.set_meta("region_improvement_pct", m.improvement_pct);
    }
    Ok((tables, regions))
}

fn require(s: &Scenario, kind: ExperimentKind) -> Result<()> {
    if s.kind != kind {
        return Err(Error::invalid(format!("scenario `{}` is a {:?}, not a {kind:?}", s.name, s.kind)));
    }
    Ok(())
}

pub fn run_scenario(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    match s.kind {
        ExperimentKind::EpsilonSweep => Ok(RunOutput { tables: run_epsilon_sweep(s)?, regions: Vec::new() }),
        ExperimentKind::PulseCount => Ok(RunOutput { tables: run_pulse_count_study(s)?, regions: Vec::new() }),
        ExperimentKind::RobustnessMap => {
            let (tables, regions) = run_robustness_map(s)?;
            Ok(RunOutput { tables, regions })
        }
    }
}

/// Writes every table of `out` under `dir`; nothing is written if any table is empty.
pub fn emit_all(out: &RunOutput, stem: &str, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    if let Some(t) = out.tables.iter().find(|t| t.rows.is_empty()) {
        return Err(Error::invalid(format!("table `{}` has no rows; nothing written", t.name)));
    }
    if out.tables.is_empty() {
        return Err(Error::invalid("run produced no tables; nothing written"));
    }
    out.tables
        .iter()
        .map(|t| {
            let path = output_path(dir, stem, t, format);
            emit_results(t, format, &path)?;
            Ok(path)
        })
        .collect()
}

/// ε at which the realization-averaged fidelity first drops below
/// `threshold`, linearly interpolated between grid points.
pub fn threshold_crossing(table: &ResultTable, threshold: f64) -> Option<f64> {
    let curve = table.mean_fidelity();
    let mut prev: Option<(f64, f64)> = None;
    for ((eps, _), f) in curve {
        if f < threshold {
            return Some(match prev {
                Some((e0, f0)) => e0 + (eps - e0) * (f0 - threshold) / (f0 - f),
                None => eps,
            });
        }
        prev = Some((eps, f));
    }
    None
}

/// Serialisable summary line per table, used by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct TableSummary {
    pub table: String,
    pub rows: usize,
    pub mean_fidelity: f64,
    pub min_fidelity: f64,
}

pub fn summarize(t: &ResultTable) -> TableSummary {
    let n = t.rows.len().max(1) as f64;
    TableSummary {
        table: t.name.clone(),
        rows: t.rows.len(),
        mean_fidelity: t.rows.iter().map(|r| r.fidelity).sum::<f64>() / n,
        min_fidelity: t.rows.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min),
    }
}
