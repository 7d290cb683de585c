//! Declarative experiment description, read from TOML.
//!
//! Frequencies are entered in Hz and converted to rad/s by the accessors.
//! A file may carry `[profiles.<name>]` tables; selecting a profile merges
//! that table over the base document before it is interpreted. The base
//! document is the `desk` profile.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{normal_modes, ChainConfig, LambDickeMatrix, MAX_IONS};
use crate::engine::{IonSystem, TargetKind};
use crate::error::{Error, Result};
use crate::modulation::PhaseModel;
use crate::pulses::{make_phase_schedule, PhasePolicy};
use crate::units::hz;

pub const DESK_PROFILE: &str = "desk";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EpsilonSweep,
    PulseCount,
    RobustnessMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Analytic,
    Schrodinger,
    Lindblad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PulseFree,
    Pulsed,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::PulseFree => "pulse_free",
            Variant::Pulsed => "pulsed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" | "json-lines" => Ok(Self::Jsonl),
            other => Err(Error::Parse(format!("unknown output format `{other}` (expected csv or jsonl)"))),
        }
    }
}

/// A list of values, or `{ from, to, points }` for an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { from: f64, to: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { from, to, points } => match points {
                0 => Vec::new(),
                1 => vec![*from],
                n => (0..*n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
            },
        }
    }

    fn zero() -> Self {
        Grid::List(vec![0.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub n_ions: usize,
    pub trap_frequency_hz: f64,
    /// Base Lamb-Dicke factor; alternative to `gradient_t_per_m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_t_per_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    /// XY8 blocks (8 pulses each).
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    pub rabi_hz: f64,
    #[serde(default = "default_policy")]
    pub policy: PhasePolicy,
    /// Policies compared by a robustness map.
    #[serde(default)]
    pub policies: Vec<PhasePolicy>,
    /// Fixed spacing; solved for the π/4 phase when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    #[serde(default)]
    pub phase_model: PhaseModel,
    /// Pulse counts of a pulse-count study (multiples of 8).
    #[serde(default)]
    pub pulse_counts: Vec<usize>,
    /// Rabi frequencies of a pulse-count study; defaults to `[rabi_hz]`.
    #[serde(default)]
    pub rabi_sweep_hz: Vec<f64>,
    /// Variants of an ε sweep.
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "Grid::zero")]
    pub eps_hz: Grid,
    /// Absolute Rabi offsets; mutually exclusive with `domega_fraction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domega_hz: Option<Grid>,
    /// Rabi offsets as fractions of Ω.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domega_fraction: Option<Grid>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Heating rates ṅ_m in phonons/s, one per mode (Lindblad tier).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heating_rates: Option<Vec<f64>>,
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            eps_hz: Grid::zero(),
            domega_hz: None,
            domega_fraction: None,
            realizations: default_realizations(),
            heating_rates: None,
            temperature_k: default_temperature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    /// Mean occupation of every mode.
    #[serde(default)]
    pub nbar: f64,
    /// Keep only the heaviest Fock branches (all when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<usize>,
    /// Evolution cutoff n_max per mode.
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

impl Default for ThermalSection {
    fn default() -> Self {
        Self { nbar: 0.0, branches: None, cutoff: default_cutoff() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default = "default_tier")]
    pub tier: Tier,
    /// Bell for two ions, Ising otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetKind>,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self { tier: default_tier(), target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
    /// Record per-row wall-clock time; zero otherwise, which keeps output
    /// byte-identical between runs.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), format: default_format(), record_timing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub chain: ChainSection,
    pub sequence: SequenceSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub thermal: ThermalSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_blocks() -> usize {
    8
}
fn default_policy() -> PhasePolicy {
    PhasePolicy::FixedZero
}
fn default_variants() -> Vec<Variant> {
    vec![Variant::PulseFree, Variant::Pulsed]
}
fn default_realizations() -> usize {
    1
}
fn default_temperature() -> f64 {
    crate::engine::heating::ROOM_TEMPERATURE
}
fn default_cutoff() -> usize {
    12
}
fn default_tier() -> Tier {
    Tier::Schrodinger
}
fn default_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

/// Recursively overlays `over` on `base`.
fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

impl Scenario {
    /// Parses a scenario, applying `[profiles.<profile>]` when given.
    pub fn from_toml_str(text: &str, profile: Option<&str>) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let profiles = match doc.remove("profiles") {
            None => toml::Table::new(),
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::Parse("`profiles` must be a table of tables".into())),
        };
        if let Some(name) = profile {
            match profiles.get(name) {
                Some(toml::Value::Table(over)) => merge(&mut doc, over),
                Some(_) => return Err(Error::Parse(format!("profile `{name}` must be a table"))),
                None if name == DESK_PROFILE => {}
                None => return Err(Error::Parse(format!("scenario has no profile `{name}`"))),
            }
        }
        let scenario: Scenario = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path, profile: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, profile)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.chain;
        if c.n_ions < 2 || c.n_ions > MAX_IONS {
            return Err(Error::invalid(format!("chain.n_ions = {} outside 2..={MAX_IONS}", c.n_ions)));
        }
        if !(c.trap_frequency_hz > 0.0) {
            return Err(Error::invalid("chain.trap_frequency_hz must be positive"));
        }
        match (c.eta, c.gradient_t_per_m) {
            (Some(e), None) if e >= 0.0 => {}
            (None, Some(g)) if g >= 0.0 => {}
            (Some(_), Some(_)) => return Err(Error::invalid("give either chain.eta or chain.gradient_t_per_m, not both")),
            (None, None) => return Err(Error::invalid("chain.eta or chain.gradient_t_per_m is required")),
            _ => return Err(Error::invalid("chain.eta / gradient must be non-negative")),
        }
        let s = &self.sequence;
        if s.blocks == 0 {
            return Err(Error::invalid("sequence.blocks must be at least 1"));
        }
        if !(s.rabi_hz > 0.0) || s.rabi_sweep_hz.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::invalid("Rabi frequencies must be positive"));
        }
        if let Some(tau) = s.tau_s {
            if !(tau > 0.0) {
                return Err(Error::invalid("sequence.tau_s must be positive"));
            }
        }
        let n = &self.noise;
        if n.realizations == 0 {
            return Err(Error::invalid("noise.realizations must be at least 1"));
        }
        if n.domega_hz.is_some() && n.domega_fraction.is_some() {
            return Err(Error::invalid("give either noise.domega_hz or noise.domega_fraction, not both"));
        }
        let eps = n.eps_hz.values();
        let dom = self.domega_grid_fraction_free();
        if eps.is_empty() || dom.is_empty() {
            return Err(Error::invalid("noise grids must be non-empty"));
        }
        if eps.iter().chain(&dom).any(|x| !x.is_finite()) {
            return Err(Error::invalid("noise grids must be finite"));
        }
        if !(n.temperature_k > 0.0) {
            return Err(Error::invalid("noise.temperature_k must be positive"));
        }
        if let Some(rates) = &n.heating_rates {
            if rates.len() != c.n_ions || rates.iter().any(|&r| !(r >= 0.0)) {
                return Err(Error::invalid("noise.heating_rates needs one non-negative rate per mode"));
            }
            if self.engine.tier != Tier::Lindblad && rates.iter().any(|&r| r > 0.0) {
                return Err(Error::invalid("heating needs engine.tier = \"lindblad\""));
            }
        }
        let t = &self.thermal;
        if !(t.nbar >= 0.0) {
            return Err(Error::invalid("thermal.nbar must be non-negative"));
        }
        if t.cutoff == 0 {
            return Err(Error::invalid("thermal.cutoff must be at least 1"));
        }
        if t.branches == Some(0) {
            return Err(Error::invalid("thermal.branches must be at least 1"));
        }
        let target = self.target();
        if target == TargetKind::Bell && c.n_ions != 2 {
            return Err(Error::invalid("the Bell target needs n_ions = 2"));
        }
        let check_policy = |p: PhasePolicy, blocks: usize| make_phase_schedule(blocks, p, 0).map(|_| ());
        match self.kind {
            ExperimentKind::EpsilonSweep => {
                if dom.iter().any(|&d| d != 0.0) {
                    return Err(Error::invalid("an ε sweep needs the δΩ grid to be {0}"));
                }
                if s.variants.is_empty() {
                    return Err(Error::invalid("sequence.variants must be non-empty"));
                }
                if s.variants.contains(&Variant::Pulsed) {
                    check_policy(s.policy, s.blocks)?;
                }
            }
            ExperimentKind::PulseCount => {
                if eps.iter().chain(&dom).any(|&x| x != 0.0) {
                    return Err(Error::invalid("a pulse-count study runs at ε = δΩ = 0"));
                }
                if s.pulse_counts.is_empty() {
                    return Err(Error::invalid("sequence.pulse_counts must be non-empty"));
                }
                for &count in &s.pulse_counts {
                    if count == 0 || count % 8 != 0 {
                        return Err(Error::invalid(format!("pulse count {count} is not a positive multiple of 8")));
                    }
                    check_policy(s.policy, count / 8)?;
                }
            }
            ExperimentKind::RobustnessMap => {
                for &p in &self.map_policies() {
                    check_policy(p, s.blocks)?;
                }
            }
        }
        if self.engine.tier == Tier::Analytic {
            let pulse_free_sweep = self.kind == ExperimentKind::EpsilonSweep && s.variants == [Variant::PulseFree];
            if !pulse_free_sweep || c.n_ions != 2 {
                return Err(Error::invalid(
                    "the analytic tier covers two-ion pulse-free ε sweeps only (set sequence.variants = [\"pulse_free\"])",
                ));
            }
        }
        Ok(())
    }

    fn domega_grid_fraction_free(&self) -> Vec<f64> {
        match (&self.noise.domega_hz, &self.noise.domega_fraction) {
            (Some(g), _) => g.values(),
            (None, Some(g)) => g.values(),
            (None, None) => vec![0.0],
        }
    }

    pub fn target(&self) -> TargetKind {
        self.engine.target.unwrap_or(if self.chain.n_ions == 2 { TargetKind::Bell } else { TargetKind::Ising })
    }

    pub fn trap_frequency(&self) -> f64 {
        hz(self.chain.trap_frequency_hz)
    }

    pub fn rabi(&self) -> f64 {
        hz(self.sequence.rabi_hz)
    }

    /// Rabi frequencies (rad/s) of a pulse-count study.
    pub fn rabi_sweep(&self) -> Vec<f64> {
        if self.sequence.rabi_sweep_hz.is_empty() {
            vec![self.rabi()]
        } else {
            self.sequence.rabi_sweep_hz.iter().map(|&f| hz(f)).collect()
        }
    }

    /// ε grid in rad/s.
    pub fn eps_grid(&self) -> Vec<f64> {
        self.noise.eps_hz.values().into_iter().map(hz).collect()
    }

    /// δΩ grid in rad/s for nominal Rabi frequency `rabi`.
    pub fn domega_grid(&self, rabi: f64) -> Vec<f64> {
        match (&self.noise.domega_hz, &self.noise.domega_fraction) {
            (Some(g), _) => g.values().into_iter().map(hz).collect(),
            (None, Some(g)) => g.values().into_iter().map(|f| f * rabi).collect(),
            (None, None) => vec![0.0],
        }
    }

    /// Policies of a robustness map; the fixed-phase baseline is always included first.
    pub fn map_policies(&self) -> Vec<PhasePolicy> {
        let mut out = vec![PhasePolicy::Fixed];
        let listed = if self.sequence.policies.is_empty() {
            vec![PhasePolicy::Random, PhasePolicy::Correlated(2)]
        } else {
            self.sequence.policies.clone()
        };
        for p in listed {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn chain_config(&self) -> ChainConfig {
        let mut cfg = ChainConfig::yb171(self.chain.n_ions, self.trap_frequency(), 0.0);
        cfg.gradient = match (self.chain.eta, self.chain.gradient_t_per_m) {
            (_, Some(g)) => g,
            (Some(eta), None) => cfg.gradient_for_eta(eta),
            (None, None) => 0.0,
        };
        cfg
    }

    pub fn ion_system(&self) -> Result<IonSystem> {
        let cfg = self.chain_config();
        cfg.validate()?;
        let modes = normal_modes(cfg.n_ions)?.with_trap_frequency(cfg.nu);
        let eta_base = self.chain.eta.unwrap_or_else(|| cfg.base_eta());
        let eta = LambDickeMatrix::from_base(eta_base, &modes);
        IonSystem::new(modes, eta)
    }

    /// JSON echo used in output metadata.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scenario serialises")
    }
}
