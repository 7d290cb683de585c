//! XY8 sequences with per-block global phases, phase-schedule policies and
//! the single-qubit algebra of imperfect π pulses.
//!
//! The 2×2 matrices in this module act on (|g⟩, |e⟩), so that
//! σ^φ = σ⁺e^{iφ} + σ⁻e^{−iφ} has e^{−iφ} in its upper-right element.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cis, C64, I};
use crate::rng;

pub type Mat2 = Matrix2<C64>;

/// Base phases of an XY8 block: X Y X Y Y X Y X.
pub const XY8_PHASES: [f64; 8] = [0.0, FRAC_PI_2, 0.0, FRAC_PI_2, FRAC_PI_2, 0.0, FRAC_PI_2, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub start: f64,
    pub duration: f64,
    pub phase: f64,
    pub rabi: f64,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub pulses: Vec<Pulse>,
    /// Centre-to-centre spacing, s.
    pub tau: f64,
    pub blocks: usize,
    pub pulses_per_block: usize,
}

impl PulseSequence {
    pub fn duration(&self) -> f64 {
        self.tau * (self.blocks * self.pulses_per_block) as f64
    }

    pub fn rabi(&self) -> f64 {
        self.pulses.first().map_or(0.0, |p| p.rabi)
    }

    pub fn pulse_duration(&self) -> f64 {
        self.pulses.first().map_or(0.0, |p| p.duration)
    }

    /// Index of the pulse active at `t`, if any.
    pub fn active(&self, t: f64) -> Option<usize> {
        if self.tau <= 0.0 || t < 0.0 {
            return None;
        }
        let k = (t / self.tau).floor() as usize;
        [k.wrapping_sub(1), k, k + 1]
            .into_iter()
            .filter(|&i| i < self.pulses.len())
            .find(|&i| self.pulses[i].contains(t))
    }

    /// Every pulse boundary plus the start and end of the sequence.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.pulses.len() + 2);
        out.push(0.0);
        for p in &self.pulses {
            out.push(p.start);
            out.push(p.end());
        }
        out.push(self.duration());
        out
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pulses {
            if ((p.duration * p.rabi) - PI).abs() > 1e-12 * PI {
                return Err(Error::invalid("pulse area differs from π"));
            }
        }
        for w in self.pulses.windows(2) {
            if w[1].start < w[0].end() {
                return Err(Error::invalid("overlapping pulses"));
            }
        }
        Ok(())
    }
}

/// XY8 sequence of `blocks` blocks with π pulses centred in slots of width `tau`.
pub fn build_xy8_sequence(blocks: usize, tau: f64, rabi: f64, schedule: &PhaseSchedule) -> Result<PulseSequence> {
    if blocks == 0 {
        return Err(Error::invalid("at least one XY8 block is required"));
    }
    if !(rabi > 0.0) {
        return Err(Error::invalid("Rabi frequency must be positive"));
    }
    if schedule.phis.len() != blocks {
        return Err(Error::invalid(format!(
            "phase schedule has {} entries for {blocks} blocks",
            schedule.phis.len()
        )));
    }
    let duration = PI / rabi;
    if !(tau > duration) {
        return Err(Error::invalid(format!(
            "spacing {tau:.4e} s does not exceed the π-pulse duration {duration:.4e} s"
        )));
    }
    let pulses = (0..8 * blocks)
        .map(|k| Pulse {
            start: (k as f64 + 0.5) * tau - 0.5 * duration,
            duration,
            phase: XY8_PHASES[k % 8] + schedule.phis[k / 8],
            rabi,
        })
        .collect();
    Ok(PulseSequence { pulses, tau, blocks, pulses_per_block: 8 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PhasePolicy {
    /// One random global phase shared by every block.
    Fixed,
    /// Every block phase is zero.
    FixedZero,
    Random,
    /// Groups of S blocks with phases Φ_g + 2πk/S.
    Correlated(usize),
}

impl FromStr for PhasePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fixed" => Ok(Self::Fixed),
            "fixed:0" => Ok(Self::FixedZero),
            "random" => Ok(Self::Random),
            other => {
                let group = other
                    .strip_prefix("correlated:")
                    .and_then(|g| g.parse::<usize>().ok())
                    .filter(|&g| g >= 1)
                    .ok_or_else(|| Error::invalid(format!("unknown phase policy '{other}'")))?;
                Ok(Self::Correlated(group))
            }
        }
    }
}

impl fmt::Display for PhasePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed => write!(f, "fixed"),
            Self::FixedZero => write!(f, "fixed:0"),
            Self::Random => write!(f, "random"),
            Self::Correlated(s) => write!(f, "correlated:{s}"),
        }
    }
}

impl TryFrom<String> for PhasePolicy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PhasePolicy> for String {
    fn from(p: PhasePolicy) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub phis: Vec<f64>,
    pub policy: PhasePolicy,
    pub seed: u64,
}

impl PhaseSchedule {
    pub fn zeros(blocks: usize) -> Self {
        Self { phis: vec![0.0; blocks], policy: PhasePolicy::FixedZero, seed: 0 }
    }
}

pub fn make_phase_schedule(blocks: usize, policy: PhasePolicy, seed: u64) -> Result<PhaseSchedule> {
    if blocks == 0 {
        return Err(Error::invalid("at least one block is required"));
    }
    let mut r = rng::stream(seed);
    let mut uniform = || r.random::<f64>() * TAU;
    let phis = match policy {
        PhasePolicy::FixedZero => vec![0.0; blocks],
        PhasePolicy::Fixed => vec![uniform(); blocks],
        PhasePolicy::Random => (0..blocks).map(|_| uniform()).collect(),
        PhasePolicy::Correlated(s) => {
            if s == 0 || blocks % s != 0 {
                return Err(Error::invalid(format!("group size {s} does not divide {blocks} blocks")));
            }
            let mut phis = Vec::with_capacity(blocks);
            for _ in 0..blocks / s {
                let base = uniform();
                phis.extend((0..s).map(|k| base + TAU * k as f64 / s as f64));
            }
            phis
        }
    };
    Ok(PhaseSchedule { phis, policy, seed })
}

/// Z_M = (1/M) Σ_s e^{−iΦ_s}.
pub fn z_statistic(schedule: &PhaseSchedule) -> C64 {
    let m = schedule.phis.len().max(1) as f64;
    schedule.phis.iter().map(|&p| cis(-p)).sum::<C64>() / m
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseError {
    /// Qubit frequency shift ε, rad/s.
    pub eps: f64,
    /// Rabi-frequency shift δΩ, rad/s.
    pub d_omega: f64,
}

impl PulseError {
    pub fn new(eps: f64, d_omega: f64) -> Self {
        Self { eps, d_omega }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { eps: s * self.eps, d_omega: s * self.d_omega }
    }

    /// Γ = √(ε² + δΩ²).
    pub fn gamma_total(&self) -> f64 {
        self.eps.hypot(self.d_omega)
    }

    /// Γ̃ = πΓ/2Ω.
    pub fn gamma_tilde(&self, rabi: f64) -> f64 {
        PI * self.gamma_total() / (2.0 * rabi)
    }

    /// sin γ = (δΩ/Γ) sin Γ̃, with γ = 0 when both shifts vanish.
    pub fn gamma(&self, rabi: f64) -> f64 {
        let g = self.gamma_total();
        if g == 0.0 {
            return 0.0;
        }
        (self.d_omega / g * self.gamma_tilde(rabi).sin()).asin()
    }

    /// tan β = (ε/Γ) tan Γ̃, with β = 0 when both shifts vanish.
    pub fn beta(&self, rabi: f64) -> f64 {
        let g = self.gamma_total();
        if g == 0.0 {
            return 0.0;
        }
        let gt = self.gamma_tilde(rabi);
        (self.eps / g * gt.sin()).atan2(gt.cos())
    }
}

fn sigma_phi(phase: f64) -> Mat2 {
    Mat2::new(c(0.0, 0.0), cis(-phase), cis(phase), c(0.0, 0.0))
}

fn sigma_z() -> Mat2 {
    Mat2::new(c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
}

/// exp(−iHt) for the constant H = (ε/2)σ^z + (Ω_eff/2)σ^φ.
fn su2_propagator(eps: f64, rabi_eff: f64, phase: f64, t: f64) -> Mat2 {
    let w = eps.hypot(rabi_eff);
    if w == 0.0 {
        return Mat2::identity();
    }
    let x = 0.5 * w * t;
    let n = (sigma_z() * c(eps / w, 0.0)) + sigma_phi(phase) * c(rabi_eff / w, 0.0);
    Mat2::identity() * c(x.cos(), 0.0) - n * (I * x.sin())
}

/// Propagator of a π pulse of nominal Rabi frequency `rabi` and duration π/Ω
/// under static shifts, multiplied by the global phase −1 so that an ideal
/// pulse is iσ^φ.
pub fn imperfect_pulse_unitary(rabi: f64, phase: f64, error: PulseError) -> Mat2 {
    -su2_propagator(error.eps, rabi + error.d_omega, phase, PI / rabi)
}

/// The (γ, β) parameterisation
/// [[sin γ, i e^{−i(φ+β)} cos γ], [i e^{i(φ+β)} cos γ, sin γ]] in the (g, e)
/// basis. It treats the detuning as static in the pulse's rotating frame and
/// coincides with [`imperfect_pulse_unitary`] only when ε = 0.
pub fn pulse_unitary_gamma_beta(rabi: f64, phase: f64, error: PulseError) -> Mat2 {
    let g = error.gamma(rabi);
    let b = error.beta(rabi);
    Mat2::new(
        c(g.sin(), 0.0),
        I * cis(-(phase + b)) * g.cos(),
        I * cis(phase + b) * g.cos(),
        c(g.sin(), 0.0),
    )
}

/// Free precession exp(−i ε t σ^z / 2).
pub fn free_precession(eps: f64, t: f64) -> Mat2 {
    let a = 0.5 * eps * t;
    Mat2::new(cis(a), c(0.0, 0.0), c(0.0, 0.0), cis(-a))
}

/// Single-qubit propagator of a window [t0, t1] of pulses (with the free
/// precession in the gaps), normalised so the error-free product is +1 times
/// its ideal form.
pub fn compose_pulses(pulses: &[Pulse], window: (f64, f64), error: PulseError) -> Mat2 {
    let mut u = Mat2::identity();
    let mut t = window.0;
    for p in pulses {
        u = imperfect_pulse_unitary(p.rabi, p.phase, error) * free_precession(error.eps, p.start - t) * u;
        t = p.end();
    }
    free_precession(error.eps, window.1 - t) * u
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockExtraction {
    pub c: C64,
    /// |c(λ) − c(λ/2)|: size of the O(γ) correction to the linear coefficient.
    pub residual: f64,
}

/// First-order coefficient C of the block propagator, U_DD ≈ [[1, iCγ], [iC*γ, 1]],
/// from two-point Richardson extrapolation in a uniform scaling of the error.
/// The pulses must form an identity when perfect.
pub fn dd_block_first_order(pulses: &[Pulse], window: (f64, f64), error: PulseError) -> Result<BlockExtraction> {
    if pulses.is_empty() || pulses.len() % 2 != 0 {
        return Err(Error::invalid("a DD block needs an even, non-zero number of pulses"));
    }
    let rabi = pulses[0].rabi;
    let gamma = error.gamma(rabi);
    if gamma.abs() > 1e-2 {
        return Err(Error::invalid(format!("γ = {gamma:.3e} too large for first-order extraction")));
    }
    if gamma == 0.0 {
        return Err(Error::invalid("γ vanishes (δΩ = 0); C is undefined"));
    }
    let ideal = compose_pulses(pulses, window, PulseError::default());
    let norm = ideal[(0, 0)];
    if (norm.norm() - 1.0).abs() > 1e-9 || ideal[(0, 1)].norm() > 1e-9 {
        return Err(Error::invalid("error-free block is not proportional to the identity"));
    }
    let coeff = |s: f64| {
        let e = error.scaled(s);
        let u = compose_pulses(pulses, window, e) / norm;
        u[(0, 1)] / (I * e.gamma(rabi))
    };
    let c1 = coeff(1.0);
    let c2 = coeff(0.5);
    Ok(BlockExtraction { c: c2 * 2.0 - c1, residual: (c1 - c2).norm() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unitarity_defect(u: &Mat2) -> f64 {
        (u.adjoint() * u - Mat2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn ideal_pulse() {
        let u = imperfect_pulse_unitary(1.0, 0.0, PulseError::default());
        let want = Mat2::new(c(0.0, 0.0), I, I, c(0.0, 0.0));
        assert!((u - want).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn gamma_beta_form_matches_without_detuning() {
        let rabi = 2.0 * PI * 40e3;
        for &(d, phase) in &[(0.03, 0.0), (-0.05, FRAC_PI_2), (0.01, 1.1)] {
            let err = PulseError::new(0.0, d * rabi);
            let a = imperfect_pulse_unitary(rabi, phase, err);
            let b = pulse_unitary_gamma_beta(rabi, phase, err);
            assert!((a - b).iter().all(|z| z.norm() < 1e-12), "{a} vs {b}");
            assert!(unitarity_defect(&b) < 1e-12);
        }
    }

    #[test]
    fn policy_round_trip() {
        for s in ["fixed", "fixed:0", "random", "correlated:5"] {
            assert_eq!(s.parse::<PhasePolicy>().unwrap().to_string(), s);
        }
        assert!("correlated:0".parse::<PhasePolicy>().is_err());
        assert!("wobbly".parse::<PhasePolicy>().is_err());
    }

    #[test]
    fn sequence_layout() {
        let sch = PhaseSchedule::zeros(1);
        let seq = build_xy8_sequence(1, 50e-6, 2.0 * PI * 40e3, &sch).unwrap();
        assert_eq!(seq.pulses.len(), 8);
        assert!((seq.pulses[0].duration - 12.5e-6).abs() < 1e-18);
        assert!((seq.pulses[3].start + 0.5 * seq.pulses[3].duration - 3.5 * 50e-6).abs() < 1e-18);
        assert_eq!(seq.pulses.iter().map(|p| p.phase).collect::<Vec<_>>(), XY8_PHASES.to_vec());
        assert!(build_xy8_sequence(1, 12.0e-6, 2.0 * PI * 40e3, &sch).is_err());
        assert_eq!(seq.active(3.5 * 50e-6), Some(3));
        assert_eq!(seq.active(3.0 * 50e-6), None);
    }
}
