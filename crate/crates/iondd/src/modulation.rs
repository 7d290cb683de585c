//! Toggling-frame modulation functions of a finite-width π-pulse sequence
//! and the spin-spin phase they accumulate.
//!
//! In the frame that follows the pulses, σ^z_j(t) → f_z(t)σ^z_j + f_⊥(t)σ^⊥_j
//! with f_z = cos ∫Ω and f_⊥ = sin ∫Ω. Both are sums of complex exponentials
//! on every segment between pulse edges, so all phase integrals are evaluated
//! in closed form segment by segment.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{CouplingMatrix, LambDickeMatrix, ModeData};
use crate::error::{Error, Result};
use crate::linalg::{c, cis, C64, I};
use crate::pulses::{build_xy8_sequence, PhaseSchedule, PulseSequence};

/// f(t) = Σ_r c_r e^{iκ_r (t − t0)} on [t0, t1).
#[derive(Debug, Clone, PartialEq)]
struct Piece {
    t0: f64,
    t1: f64,
    fz: Vec<(C64, f64)>,
    fperp: Vec<(C64, f64)>,
    in_pulse: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationProfile {
    pieces: Vec<Piece>,
    /// f_z after the last pulse; held beyond `end`.
    final_sign: f64,
    end: f64,
}

impl ModulationProfile {
    /// Profile of `seq`, or the constant f_z ≡ 1 over [0, `end`] without pulses.
    pub fn new(seq: Option<&PulseSequence>, end: f64) -> Self {
        let mut pieces = Vec::new();
        let mut sign = 1.0;
        let mut t = 0.0;
        let constant = |t0: f64, t1: f64, s: f64| Piece {
            t0,
            t1,
            fz: vec![(c(s, 0.0), 0.0)],
            fperp: Vec::new(),
            in_pulse: false,
        };
        let mut end = end;
        if let Some(seq) = seq {
            end = end.max(seq.duration());
            for p in &seq.pulses {
                if p.start > t {
                    pieces.push(constant(t, p.start, sign));
                }
                let w = p.rabi;
                // s·cos(Ωu) and s·sin(Ωu), u = t − t_start.
                pieces.push(Piece {
                    t0: p.start,
                    t1: p.end(),
                    fz: vec![(c(0.5 * sign, 0.0), w), (c(0.5 * sign, 0.0), -w)],
                    fperp: vec![(-I * (0.5 * sign), w), (I * (0.5 * sign), -w)],
                    in_pulse: true,
                });
                sign = -sign;
                t = p.end();
            }
        }
        if end > t {
            pieces.push(constant(t, end, sign));
        }
        Self { pieces, final_sign: sign, end }
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    fn eval(terms: &[(C64, f64)], u: f64) -> f64 {
        terms.iter().map(|&(a, k)| (a * cis(k * u)).re).sum()
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        if t >= self.end {
            return (self.final_sign, 0.0);
        }
        let idx = self.pieces.partition_point(|p| p.t1 <= t).min(self.pieces.len() - 1);
        let p = &self.pieces[idx];
        let u = t - p.t0;
        (Self::eval(&p.fz, u), Self::eval(&p.fperp, u))
    }

    /// Pieces intersected with [0, t], extending the final constant if needed.
    fn clipped(&self, t: f64) -> Vec<Piece> {
        let mut out: Vec<Piece> = Vec::new();
        for p in &self.pieces {
            if p.t0 >= t {
                break;
            }
            let mut q = p.clone();
            q.t1 = q.t1.min(t);
            out.push(q);
        }
        if t > self.end {
            out.push(Piece {
                t0: self.end,
                t1: t,
                fz: vec![(c(self.final_sign, 0.0), 0.0)],
                fperp: Vec::new(),
                in_pulse: false,
            });
        }
        out
    }
}

/// (f_z, f_⊥) at time `t` of the sequence.
pub fn modulation_at(seq: &PulseSequence, t: f64) -> Result<(f64, f64)> {
    let end = seq.duration();
    if !(0.0..=end).contains(&t) {
        return Err(Error::invalid(format!("t = {t:.6e} s outside [0, {end:.6e}] s")));
    }
    Ok(ModulationProfile::new(Some(seq), end).at(t))
}

/// sinh(h)/h, stable near zero.
fn shc(h: C64) -> C64 {
    if h.norm() < 1e-3 {
        let h2 = h * h;
        c(1.0, 0.0) + h2 / 6.0 + h2 * h2 / 120.0
    } else {
        h.sinh() / h
    }
}

/// Divided difference exp[z0, z1].
fn dd2(z0: C64, z1: C64) -> C64 {
    let m = (z0 + z1) * 0.5;
    m.exp() * shc((z1 - z0) * 0.5)
}

/// Divided difference exp[z0, z1, z2] = ∫_{simplex} e^{s·z}.
fn dd3(z: [C64; 3]) -> C64 {
    let pairs = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];
    let (a, b, k) = pairs
        .into_iter()
        .max_by(|x, y| (z[x.0] - z[x.1]).norm().total_cmp(&(z[y.0] - z[y.1]).norm()))
        .unwrap();
    let sep = (z[a] - z[b]).norm();
    if sep >= 1.0 {
        return (dd2(z[k], z[b]) - dd2(z[a], z[k])) / (z[b] - z[a]);
    }
    // Clustered nodes: Taylor series of the Opitz matrix exponential around the mean.
    let m = (z[0] + z[1] + z[2]) / 3.0;
    let w = [z[0] - m, z[1] - m, z[2] - m];
    // Complete homogeneous polynomials h_j(w0, w1, w2).
    let mut total = c(0.0, 0.0);
    let mut fact = 2.0;
    let mut pw0 = vec![c(1.0, 0.0)];
    for j in 0..30 {
        if j > 0 {
            let last = *pw0.last().unwrap();
            pw0.push(last * w[0]);
        }
        let mut h = c(0.0, 0.0);
        for a0 in 0..=j {
            let rest = j - a0;
            let mut h2 = c(0.0, 0.0);
            let mut y = c(1.0, 0.0);
            for b in 0..=rest {
                h2 += y * w[2].powu((rest - b) as u32);
                y *= w[1];
            }
            h += pw0[a0] * h2;
        }
        let term = h / fact;
        total += term;
        fact *= (j + 3) as f64;
        if term.norm() < 1e-18 * total.norm().max(1e-300) && j > 4 {
            break;
        }
    }
    m.exp() * total
}

/// Integral of one piece pair: (∫_0^L g e^{iνu} du, ∫∫_{0<v<u<L} g(u)h(v)e^{iν(u−v)}, ∫_0^L h e^{−iνv} dv).
fn piece_integrals(g: &[(C64, f64)], h: &[(C64, f64)], nu: f64, len: f64) -> (C64, C64, C64) {
    let mut single_g = c(0.0, 0.0);
    let mut double = c(0.0, 0.0);
    let mut single_h = c(0.0, 0.0);
    let zero = c(0.0, 0.0);
    for &(a, k) in g {
        let p = (k + nu) * len;
        single_g += a * dd2(zero, I * p) * len;
        for &(b, q) in h {
            let qq = (q - nu) * len;
            double += a * b * dd3([zero, I * p, I * (p + qq)]) * (len * len);
        }
    }
    for &(b, q) in h {
        single_h += b * dd2(zero, I * ((q - nu) * len)) * len;
    }
    (single_g, double, single_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Z,
    One,
}

fn terms(p: &Piece, ch: Channel) -> Vec<(C64, f64)> {
    match ch {
        Channel::Z => p.fz.clone(),
        Channel::One => vec![(c(1.0, 0.0), 0.0)],
    }
}

/// ∫_0^t dt′ g(t′) ∫_0^{t′} dt″ h(t″) e^{iν(t′−t″)}.
fn double_integral(pieces: &[Piece], g: Channel, h: Channel, nu: f64) -> C64 {
    let mut cum_h = c(0.0, 0.0);
    let mut total = c(0.0, 0.0);
    for p in pieces {
        let len = p.t1 - p.t0;
        if len <= 0.0 {
            continue;
        }
        let (sg, dbl, sh) = piece_integrals(&terms(p, g), &terms(p, h), nu, len);
        total += cum_h * cis(nu * p.t0) * sg + dbl;
        cum_h += cis(-nu * p.t0) * sh;
    }
    total
}

/// Same-pulse transverse integral Σ_p ∫∫_{p} f_⊥(t′)f_⊥(t″)e^{iν(t′−t″)}.
fn same_pulse_perp(pieces: &[Piece], nu: f64) -> C64 {
    pieces
        .iter()
        .filter(|p| p.in_pulse && p.t1 > p.t0)
        .map(|p| piece_integrals(&p.fperp, &p.fperp, nu, p.t1 - p.t0).1)
        .sum()
}

/// Per-mode imaginary parts of the phase integrals at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseIntegrals {
    /// K_zz: ℑ∫∫ f_z f_z e^{iν(t′−t″)}.
    pub zz: Vec<f64>,
    /// ℑ∫∫ (f_z(t′) + f_z(t″)) e^{iν(t′−t″)}, driving single-qubit phases.
    pub linear: Vec<f64>,
    /// Same-pulse transverse K_⊥.
    pub perp: Vec<f64>,
}

pub fn phase_integrals(profile: &ModulationProfile, freqs: &[f64], t: f64) -> PhaseIntegrals {
    let pieces = profile.clipped(t);
    let mut out = PhaseIntegrals { zz: vec![], linear: vec![], perp: vec![] };
    for &nu in freqs {
        out.zz.push(double_integral(&pieces, Channel::Z, Channel::Z, nu).im);
        out.linear.push(
            (double_integral(&pieces, Channel::Z, Channel::One, nu) + double_integral(&pieces, Channel::One, Channel::Z, nu)).im,
        );
        out.perp.push(same_pulse_perp(&pieces, nu).im);
    }
    out
}

/// How the finite-width pulses enter the accumulated spin-spin phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    /// Longitudinal modulation only: θ = Σ ν²ηη K_zz.
    Longitudinal,
    /// Adds the adiabatic part of the transverse coupling during pulses,
    /// θ = Σ ν²ηη (K_zz − K_⊥/2).
    #[default]
    TransverseCorrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinPhases {
    /// Two-qubit phases θ_ij (diagonal included).
    pub zz: DMatrix<f64>,
    /// Single-qubit z phases λ_k.
    pub linear: Vec<f64>,
}

impl SpinPhases {
    /// θ_ij + θ_ji.
    pub fn pair_total(&self, i: usize, j: usize) -> f64 {
        self.zz[(i, j)] + self.zz[(j, i)]
    }
}

/// Spin phases of the propagator exp(i Σ_ij θ_ij σ^z_i σ^z_j + i Σ_k λ_k σ^z_k)
/// accumulated by time `t` under the modulation profile.
pub fn spin_phases(
    profile: &ModulationProfile,
    eta: &LambDickeMatrix,
    modes: &ModeData,
    t: f64,
    model: PhaseModel,
) -> SpinPhases {
    let k = phase_integrals(profile, &modes.freqs, t);
    let n = eta.n_ions();
    let nm = eta.n_modes();
    let weight = |m: usize| {
        let w = modes.freqs[m] * modes.freqs[m];
        match model {
            PhaseModel::Longitudinal => w * k.zz[m],
            PhaseModel::TransverseCorrected => w * (k.zz[m] - 0.5 * k.perp[m]),
        }
    };
    let wz: Vec<f64> = (0..nm).map(weight).collect();
    let zz = DMatrix::from_fn(n, n, |i, j| (0..nm).map(|m| wz[m] * eta.eta[(i, m)] * eta.eta[(j, m)]).sum());
    let linear = (0..n)
        .map(|i| {
            (0..nm)
                .map(|m| {
                    let col: f64 = (0..n).map(|j| eta.eta[(j, m)]).sum();
                    modes.freqs[m] * modes.freqs[m] * eta.eta[(i, m)] * col * k.linear[m]
                })
                .sum()
        })
        .collect();
    SpinPhases { zz, linear }
}

/// θ_ij(t) = Σ_m ν_m² η_im η_jm ℑ∫₀ᵗ∫₀^{t′} e^{iν_m(t′−t″)} f_z(t′)f_z(t″) dt″dt′.
pub fn pulsed_phase(seq: Option<&PulseSequence>, eta: &LambDickeMatrix, modes: &ModeData, t: f64) -> DMatrix<f64> {
    let profile = ModulationProfile::new(seq, t);
    spin_phases(&profile, eta, modes, t, PhaseModel::Longitudinal).zz
}

/// Total two-ion phase θ_ij + θ_ji of a pair sampled at `times`.
pub fn phase_curve(
    seq: Option<&PulseSequence>,
    eta: &LambDickeMatrix,
    modes: &ModeData,
    pair: (usize, usize),
    times: &[f64],
    model: PhaseModel,
) -> Vec<f64> {
    let end = times.iter().copied().fold(0.0, f64::max);
    let profile = ModulationProfile::new(seq, end);
    times
        .iter()
        .map(|&t| spin_phases(&profile, eta, modes, t, model).pair_total(pair.0, pair.1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spacing {
    pub tau: f64,
    pub t_fw: f64,
}

/// Spacing τ for which an M-block XY8 sequence (Φ ≡ 0) accumulates `target`
/// as the total two-ion phase of the most strongly coupled pair at its end.
pub fn solve_spacing(
    blocks: usize,
    rabi: f64,
    eta: &LambDickeMatrix,
    modes: &ModeData,
    coupling: &CouplingMatrix,
    target: f64,
    model: PhaseModel,
) -> Result<Spacing> {
    if blocks == 0 || !(rabi > 0.0) || !(target > 0.0) {
        return Err(Error::invalid("solve_spacing needs blocks ≥ 1, Ω > 0 and a positive target"));
    }
    let pair = coupling.strongest_pair();
    let sign = coupling.j[pair].signum();
    let schedule = PhaseSchedule::zeros(blocks);
    let phase = |tau: f64| -> Result<f64> {
        let seq = build_xy8_sequence(blocks, tau, rabi, &schedule)?;
        let end = seq.duration();
        let profile = ModulationProfile::new(Some(&seq), end);
        Ok(sign * spin_phases(&profile, eta, modes, end, model).pair_total(pair.0, pair.1))
    };
    let pulses = (8 * blocks) as f64;
    let mut lo = std::f64::consts::PI / rabi * (1.0 + 1e-9);
    let mut curve = Vec::new();
    let f_lo = phase(lo)?;
    curve.push((lo, f_lo));
    if f_lo >= target {
        return Err(Error::Bracket { target, curve });
    }
    let j = 2.0 * coupling.j[pair].abs();
    let mut hi = (target / j / pulses).max(2.0 * lo);
    let mut f_hi = phase(hi)?;
    curve.push((hi, f_hi));
    let mut tries = 0;
    while f_hi < target {
        lo = hi;
        hi *= 1.5;
        f_hi = phase(hi)?;
        curve.push((hi, f_hi));
        tries += 1;
        if tries > 60 || !f_hi.is_finite() {
            return Err(Error::Bracket { target, curve });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = phase(mid)?;
        if (f - target).abs() < 1e-12 || hi - lo < 1e-16 * hi {
            lo = mid;
            hi = mid;
            break;
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let residual = (phase(tau)? - target).abs();
    if residual > 1e-9 {
        return Err(Error::Convergence { what: "spacing bisection", residual });
    }
    Ok(Spacing { tau, t_fw: pulses * tau })
}
