//! Closed-form pieces of the pulse-free propagator U = U_S U_F and the
//! fidelity cost of the residual spin-boson displacement.

use nalgebra::DMatrix;

use crate::chain::{LambDickeMatrix, ModeData};
use crate::error::{Error, Result};
use crate::linalg::{c, cis, displacement, min_eigenvalue, CMatrix, CVector, C64};
use crate::spin;

/// α_jm(t) = −η_jm (e^{iν_m t} − 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementAmplitudes {
    /// alpha[(ion, mode)].
    pub alpha: CMatrix,
    pub t: f64,
}

impl DisplacementAmplitudes {
    pub fn ion(&self, j: usize) -> Vec<C64> {
        self.alpha.row(j).iter().copied().collect()
    }
}

pub fn displacement_amplitudes(eta: &LambDickeMatrix, modes: &ModeData, t: f64) -> DisplacementAmplitudes {
    let alpha = CMatrix::from_fn(eta.n_ions(), eta.n_modes(), |j, m| {
        -(cis(modes.freqs[m] * t) - c(1.0, 0.0)) * eta.eta[(j, m)]
    });
    DisplacementAmplitudes { alpha, t }
}

/// θ_ij(t) = Σ_m η_im η_jm (ν_m t − sin ν_m t), diagonal included.
pub fn free_phase(eta: &LambDickeMatrix, modes: &ModeData, t: f64) -> DMatrix<f64> {
    let n = eta.n_ions();
    DMatrix::from_fn(n, n, |i, j| {
        (0..eta.n_modes())
            .map(|m| {
                eta.eta[(i, m)] * eta.eta[(j, m)] * x_minus_sin(modes.freqs[m] * t)
            })
            .sum()
    })
}

/// x − sin x without cancellation at small x.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return x - x.sin();
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = 0.0f64;
    let mut k = 4.0;
    while term.abs() > 1e-18 * sum.abs() {
        sum += term;
        term *= -x2 / (k * (k + 1.0));
        k += 2.0;
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityEstimate {
    pub value: f64,
    /// Θ_mm′.
    pub theta_terms: CMatrix,
    pub nbar: Vec<f64>,
}

impl FidelityEstimate {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.value
    }
}

fn check_pair(alpha_i: &[C64], alpha_j: &[C64], nbar: &[f64]) -> Result<()> {
    if alpha_i.len() != alpha_j.len() || alpha_i.len() != nbar.len() {
        return Err(Error::invalid("displacement and occupation lists differ in length"));
    }
    if nbar.iter().any(|&n| !(n >= 0.0)) {
        return Err(Error::invalid("mean occupations must be non-negative"));
    }
    Ok(())
}

/// Lowest-order Bell-state fidelity, 1 − ½ Σ_{mm′} Θ_mm′ (2n̄_m+1)(2n̄_m′+1).
pub fn bell_fidelity_estimate(alpha_i: &[C64], alpha_j: &[C64], nbar: &[f64]) -> Result<FidelityEstimate> {
    check_pair(alpha_i, alpha_j, nbar)?;
    let k = nbar.len();
    let theta = CMatrix::from_fn(k, k, |m, mp| {
        let (ai, aj, bi, bj) = (alpha_i[m], alpha_j[m], alpha_i[mp], alpha_j[mp]);
        c(ai.norm_sqr() * bi.norm_sqr() + aj.norm_sqr() * bj.norm_sqr(), 0.0)
            + ai * aj.conj() * bi * bj.conj() * 4.0
    });
    let mut sum = c(0.0, 0.0);
    for m in 0..k {
        for mp in 0..k {
            sum += theta[(m, mp)] * ((2.0 * nbar[m] + 1.0) * (2.0 * nbar[mp] + 1.0));
        }
    }
    let scale = sum.norm().max(1e-300);
    if sum.im.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::Convergence { what: "Θ double sum (imaginary residue)", residual: sum.im });
    }
    Ok(FidelityEstimate { value: 1.0 - 0.5 * sum.re, theta_terms: theta, nbar: nbar.to_vec() })
}

/// Worst-case two-ion infidelity bound at n̄ = 1.
pub fn fidelity_bound(eta_base: f64) -> f64 {
    98.0 * eta_base.powi(4)
}

/// Thermal second moments (⟨g_i²⟩, ⟨g_j²⟩, ½⟨{g_i, g_j}⟩).
fn second_moments(alpha_i: &[C64], alpha_j: &[C64], nbar: &[f64]) -> (f64, f64, f64) {
    let mut gii = 0.0;
    let mut gjj = 0.0;
    let mut gij = 0.0;
    for m in 0..nbar.len() {
        let w = 2.0 * nbar[m] + 1.0;
        gii -= 4.0 * alpha_i[m].norm_sqr() * w;
        gjj -= 4.0 * alpha_j[m].norm_sqr() * w;
        gij -= 4.0 * (alpha_i[m] * alpha_j[m].conj()).re * w;
    }
    (gii, gjj, gij)
}

/// Reduced two-qubit state Tr_M[U_F (|B⟩⟨B| ⊗ ρ_T) U_F†] for thermal modes,
/// in the (ee, eg, ge, gg) basis, using ⟨e^G⟩ = e^{⟨G²⟩/2}.
pub fn residual_density_matrix(alpha_i: &[C64], alpha_j: &[C64], nbar: &[f64]) -> Result<CMatrix> {
    check_pair(alpha_i, alpha_j, nbar)?;
    let (gii, gjj, gij) = second_moments(alpha_i, alpha_j, nbar);
    let bell = spin::bell_state();
    // Excitation pattern of each configuration: e^{c_i g_i + c_j g_j}.
    let occ = |s: usize| (spin::excited(s, 0, 2), spin::excited(s, 1, 2));
    let rho = CMatrix::from_fn(4, 4, |s, sp| {
        let (ci, cj) = occ(s);
        let (di, dj) = occ(sp);
        let (a, b) = (ci - di, cj - dj);
        let g2 = a * a * gii + b * b * gjj + 2.0 * a * b * gij;
        bell[s] * bell[sp].conj() * (0.5 * g2).exp()
    });
    let lmin = min_eigenvalue(&rho);
    if lmin < -1e-10 {
        return Err(Error::NonPhysical { min_eigenvalue: lmin });
    }
    Ok(rho)
}

/// Fidelity ⟨ψ|ρ|ψ⟩/√Tr ρ² of a density matrix against a pure target.
pub fn pure_target_fidelity(rho: &CMatrix, target: &CVector) -> f64 {
    let num = (target.adjoint() * rho * target)[(0, 0)].norm();
    let purity = (rho * rho).trace().re;
    num / purity.sqrt()
}

/// Exact U_S(t) U_F(t) applied to |spin⟩ ⊗ |n_1 … n_K⟩ on a truncated Fock
/// space; amplitudes are laid out spin-major, modes row-major (mode 0 slowest).
pub fn free_propagator_state(
    eta: &LambDickeMatrix,
    modes: &ModeData,
    t: f64,
    spin_state: &CVector,
    fock: &[usize],
    cutoffs: &[usize],
) -> Result<CVector> {
    let n = eta.n_ions();
    let k = eta.n_modes();
    if spin_state.len() != 1 << n || fock.len() != k || cutoffs.len() != k {
        return Err(Error::invalid("spin/fock/cutoff dimensions do not match the chain"));
    }
    if fock.iter().zip(cutoffs).any(|(f, c)| f > c) {
        return Err(Error::invalid("initial Fock label above cutoff"));
    }
    let alpha = displacement_amplitudes(eta, modes, t);
    let theta = free_phase(eta, modes, t);
    let dims: Vec<usize> = cutoffs.iter().map(|c| c + 1).collect();
    let dm: usize = dims.iter().product();
    let mut out = CVector::zeros((1 << n) * dm);
    for s in 0..1 << n {
        if spin_state[s] == c(0.0, 0.0) {
            continue;
        }
        let mut phase = 0.0;
        for i in 0..n {
            for j in 0..n {
                phase += theta[(i, j)] * 4.0 * spin::excited(s, i, n) * spin::excited(s, j, n);
            }
        }
        // Product state over modes: column `fock[m]` of each displacement.
        let mut amp = vec![spin_state[s] * cis(phase)];
        for m in 0..k {
            let beta: C64 = (0..n).map(|j| alpha.alpha[(j, m)] * (2.0 * spin::excited(s, j, n))).sum();
            let d = displacement(beta, cutoffs[m]);
            let col = d.column(fock[m]);
            let mut next = Vec::with_capacity(amp.len() * dims[m]);
            for a in &amp {
                for x in col.iter() {
                    next.push(a * x);
                }
            }
            amp = next;
        }
        for (idx, a) in amp.into_iter().enumerate() {
            out[s * dm + idx] = a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::normal_modes;

    #[test]
    fn zero_alpha_gives_bell_projector() {
        let z = vec![c(0.0, 0.0); 2];
        let rho = residual_density_matrix(&z, &z, &[1.0, 1.0]).unwrap();
        let b = spin::bell_state();
        let proj = &b * b.adjoint();
        assert!(crate::linalg::max_abs_diff(&rho, &proj) < 1e-15);
        assert_eq!(bell_fidelity_estimate(&z, &z, &[1.0, 1.0]).unwrap().value, 1.0);
    }

    #[test]
    fn amplitudes_close_after_full_period() {
        let modes = normal_modes(2).unwrap().with_trap_frequency(1.0);
        let eta = LambDickeMatrix::from_base(0.05, &modes);
        let a = displacement_amplitudes(&eta, &modes, 2.0 * std::f64::consts::PI);
        assert!(a.alpha[(0, 0)].norm() < 1e-15);
        let a = displacement_amplitudes(&eta, &modes, std::f64::consts::PI);
        assert!((a.alpha[(1, 0)] - c(2.0 * eta.eta[(1, 0)], 0.0)).norm() < 1e-15);
    }

    #[test]
    fn bound_values() {
        assert!((fidelity_bound(0.056) - 9.64e-4).abs() < 1e-6);
        assert_eq!(fidelity_bound(0.0), 0.0);
    }
}
