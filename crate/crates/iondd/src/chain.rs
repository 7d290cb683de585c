//! Axial normal modes of a linear ion crystal, Lamb-Dicke factors from a
//! static magnetic-field gradient, and the mode-mediated spin-spin couplings.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{GAMMA_E, HBAR, YB171_MASS};

pub const MAX_IONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_ions: usize,
    /// Axial (centre-of-mass) trap frequency, rad/s.
    pub nu: f64,
    /// Magnetic-field gradient, T/m.
    pub gradient: f64,
    /// Ion mass, kg.
    pub ion_mass: f64,
    /// Gyromagnetic ratio, rad s⁻¹ T⁻¹.
    pub gamma_e: f64,
    /// Field offset at the trap centre, T. Informational only.
    pub b0: f64,
}

impl ChainConfig {
    /// A ¹⁷¹Yb⁺ chain.
    pub fn yb171(n_ions: usize, nu: f64, gradient: f64) -> Self {
        Self { n_ions, nu, gradient, ion_mass: YB171_MASS, gamma_e: GAMMA_E, b0: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 2 || self.n_ions > MAX_IONS {
            return Err(Error::invalid(format!("ion count {} outside 2..={MAX_IONS}", self.n_ions)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::invalid("trap frequency must be positive"));
        }
        if !(self.ion_mass > 0.0) {
            return Err(Error::invalid("ion mass must be positive"));
        }
        if !(self.gradient >= 0.0) {
            return Err(Error::invalid("field gradient must be non-negative"));
        }
        Ok(())
    }

    /// η = (γ_e g_B / 4ν) √(ħ / 2Mν).
    pub fn base_eta(&self) -> f64 {
        self.gamma_e * self.gradient / (4.0 * self.nu) * (HBAR / (2.0 * self.ion_mass * self.nu)).sqrt()
    }

    /// Uniform single-qubit shift δ = ħγ_e g_B / (2Mν) of the effective Ising model.
    pub fn global_shift(&self) -> f64 {
        HBAR * self.gamma_e * self.gradient / (2.0 * self.ion_mass * self.nu)
    }

    /// Gradient that produces the requested base Lamb-Dicke factor.
    pub fn gradient_for_eta(&self, eta: f64) -> f64 {
        eta * 4.0 * self.nu / (self.gamma_e * (HBAR / (2.0 * self.ion_mass * self.nu)).sqrt())
    }
}

/// Axial modes. `freqs` share units with `nu`: rad/s for a physical chain,
/// or multiples of the trap frequency when `nu == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeData {
    pub nu: f64,
    pub freqs: Vec<f64>,
    /// b[(ion, mode)]; columns are orthonormal.
    pub bmat: DMatrix<f64>,
    /// Dimensionless equilibrium positions, in units of (e²/4πε₀Mν²)^{1/3}.
    pub positions: Vec<f64>,
}

impl ModeData {
    pub fn n_ions(&self) -> usize {
        self.bmat.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.freqs.len()
    }

    /// Frequencies relative to the centre-of-mass mode.
    pub fn ratios(&self) -> Vec<f64> {
        self.freqs.iter().map(|f| f / self.nu).collect()
    }

    /// Same mode shapes, rescaled to the trap frequency `nu` (rad/s).
    pub fn with_trap_frequency(&self, nu: f64) -> Self {
        let ratios = self.ratios();
        Self {
            nu,
            freqs: ratios.iter().map(|r| r * nu).collect(),
            bmat: self.bmat.clone(),
            positions: self.positions.clone(),
        }
    }

    /// Keeps only the listed modes (in the given order).
    pub fn select(&self, modes: &[usize]) -> Self {
        let bmat = DMatrix::from_fn(self.n_ions(), modes.len(), |j, k| self.bmat[(j, modes[k])]);
        Self {
            nu: self.nu,
            freqs: modes.iter().map(|&m| self.freqs[m]).collect(),
            bmat,
            positions: self.positions.clone(),
        }
    }
}

fn potential(u: &[f64]) -> f64 {
    let mut v = 0.0;
    for i in 0..u.len() {
        v += 0.5 * u[i] * u[i];
        for j in 0..i {
            v += 1.0 / (u[i] - u[j]).abs();
        }
    }
    v
}

fn gradient(u: &[f64]) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |i, _| {
        let mut g = u[i];
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 1.0;
        for j in 0..n {
            if j != i {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                diag += c;
                a[(i, j)] = -c;
            }
        }
        a[(i, i)] = diag;
    }
    a
}

/// Equilibrium positions of `n` ions in a harmonic well, by damped Newton
/// iteration on the force balance.
pub fn equilibrium_positions(n: usize) -> Result<Vec<f64>> {
    if !(2..=MAX_IONS).contains(&n) {
        return Err(Error::invalid(format!("ion count {n} outside 2..={MAX_IONS}")));
    }
    let spacing = 2.0 * (n as f64).powf(-0.56);
    let mut u: Vec<f64> = (0..n).map(|i| spacing * (i as f64 - 0.5 * (n - 1) as f64)).collect();
    let mut g = gradient(&u);
    for _ in 0..200 {
        if g.norm() < 1e-12 {
            return Ok(u);
        }
        let step = hessian(&u)
            .cholesky()
            .map(|c| c.solve(&g))
            .unwrap_or_else(|| g.clone());
        let v0 = potential(&u);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - lambda * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered && (potential(&trial) <= v0 || gradient(&trial).norm() < g.norm()) {
                u = trial;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::Convergence { what: "equilibrium solver", residual: g.norm() });
            }
        }
        g = gradient(&u);
    }
    if g.norm() < 1e-12 {
        Ok(u)
    } else {
        Err(Error::Convergence { what: "equilibrium solver", residual: g.norm() })
    }
}

/// Axial normal modes of an `n`-ion chain with frequencies in units of the
/// trap frequency (ascending) and participation vectors whose first
/// non-negligible component is positive.
pub fn normal_modes(n: usize) -> Result<ModeData> {
    let u = equilibrium_positions(n)?;
    let eig = SymmetricEigen::new(hessian(&u));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut bmat = DMatrix::zeros(n, n);
    let mut freqs = Vec::with_capacity(n);
    for (m, &k) in order.iter().enumerate() {
        freqs.push(eig.eigenvalues[k].max(0.0).sqrt());
        let col = eig.eigenvectors.column(k);
        let lead = col.iter().copied().find(|x| x.abs() > 1e-9).unwrap_or(1.0);
        let sign = lead.signum();
        for j in 0..n {
            bmat[(j, m)] = sign * col[j];
        }
    }
    // The centre-of-mass eigenvalue is exactly 1; remove rounding.
    freqs[0] = 1.0;
    Ok(ModeData { nu: 1.0, freqs, bmat, positions: u })
}

/// Modes of a configured chain in rad/s.
pub fn chain_modes(config: &ChainConfig) -> Result<ModeData> {
    config.validate()?;
    Ok(normal_modes(config.n_ions)?.with_trap_frequency(config.nu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambDickeMatrix {
    /// η[(ion, mode)].
    pub eta: DMatrix<f64>,
    pub eta_base: f64,
}

impl LambDickeMatrix {
    /// η_jm = b_jm (ν_m/ν)^{-3/2} η.
    pub fn from_base(eta_base: f64, modes: &ModeData) -> Self {
        let ratios = modes.ratios();
        let eta = DMatrix::from_fn(modes.n_ions(), modes.n_modes(), |j, m| {
            modes.bmat[(j, m)] * ratios[m].powf(-1.5) * eta_base
        });
        Self { eta, eta_base }
    }

    pub fn n_ions(&self) -> usize {
        self.eta.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.eta.ncols()
    }

    /// Lamb-Dicke factors restricted to a pair of ions, shape 2 × modes.
    pub fn pair(&self, i: usize, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(2, self.n_modes(), |r, m| self.eta[(if r == 0 { i } else { j }, m)])
    }
}

/// Per-mode Lamb-Dicke factors from the field gradient, with `modes` either
/// dimensionless or already scaled to `config.nu`.
pub fn lamb_dicke(config: &ChainConfig, modes: &ModeData) -> Result<LambDickeMatrix> {
    config.validate()?;
    if modes.n_ions() != config.n_ions {
        return Err(Error::invalid(format!(
            "mode data for {} ions, chain has {}",
            modes.n_ions(),
            config.n_ions
        )));
    }
    let ratios = modes.ratios();
    let eta = DMatrix::from_fn(config.n_ions, modes.n_modes(), |j, m| {
        let nu_m = ratios[m] * config.nu;
        modes.bmat[(j, m)] * config.gamma_e * config.gradient / (4.0 * nu_m)
            * (HBAR / (2.0 * config.ion_mass * nu_m)).sqrt()
    });
    Ok(LambDickeMatrix { eta, eta_base: config.base_eta() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    /// J_ij = Σ_m ν_m η_im η_jm off the diagonal, zero on it (rad/s).
    pub j: DMatrix<f64>,
    /// Σ_m ν_m η_im η_jm including the diagonal.
    pub full: DMatrix<f64>,
}

impl CouplingMatrix {
    pub fn n_ions(&self) -> usize {
        self.j.nrows()
    }

    /// Single-qubit shifts (δ_i, δ_j) of the two-ion effective model,
    /// δ_i = 4 Σ_m ν_m η_im (η_im + η_jm).
    pub fn pair_shifts(&self, i: usize, j: usize) -> (f64, f64) {
        let f = &self.full;
        (4.0 * (f[(i, i)] + f[(i, j)]), 4.0 * (f[(j, j)] + f[(i, j)]))
    }

    /// Effective pair coupling J = 2 Σ_m ν_m η_im η_jm.
    pub fn pair_coupling(&self, i: usize, j: usize) -> f64 {
        2.0 * self.j[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.j.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Ion pair carrying the largest |J_ij|.
    pub fn strongest_pair(&self) -> (usize, usize) {
        let n = self.n_ions();
        let mut best = (0, 1);
        for i in 0..n {
            for k in i + 1..n {
                if self.j[(i, k)].abs() > self.j[best].abs() {
                    best = (i, k);
                }
            }
        }
        best
    }
}

pub fn coupling_matrix(eta: &LambDickeMatrix, modes: &ModeData) -> Result<CouplingMatrix> {
    if eta.n_ions() != modes.n_ions() || eta.n_modes() != modes.n_modes() {
        return Err(Error::invalid("Lamb-Dicke matrix and mode data dimensions differ"));
    }
    let n = eta.n_ions();
    // Evaluated on the upper triangle only so the result is exactly symmetric.
    let full = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        (0..modes.n_modes()).map(|m| modes.freqs[m] * eta.eta[(a, m)] * eta.eta[(b, m)]).sum()
    });
    let mut j = full.clone();
    j.fill_diagonal(0.0);
    Ok(CouplingMatrix { j, full })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    BellPair { i: usize, j: usize },
    Multi,
}

/// Ideal gate time: π/4J for a pair, π/(8 max|J_ij|) for the whole chain.
pub fn gate_time(coupling: &CouplingMatrix, kind: GateKind) -> Result<f64> {
    let j = match kind {
        GateKind::BellPair { i, j } => {
            if i == j || i >= coupling.n_ions() || j >= coupling.n_ions() {
                return Err(Error::invalid(format!("invalid ion pair ({i}, {j})")));
            }
            coupling.pair_coupling(i, j).abs()
        }
        GateKind::Multi => 2.0 * coupling.max_abs(),
    };
    if !(j > 0.0) {
        return Err(Error::invalid("gate time undefined for zero coupling"));
    }
    Ok(PI / (4.0 * j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_ion_closed_form() {
        let m = normal_modes(2).unwrap();
        assert!((m.freqs[1] - 3f64.sqrt()).abs() < 1e-12);
        assert!((m.positions[1] - 0.25f64.cbrt()).abs() < 1e-12);
        let r = 0.5f64.sqrt();
        assert!((m.bmat[(0, 0)] - r).abs() < 1e-12);
        assert!((m.bmat[(0, 1)].abs() - r).abs() < 1e-12);
        assert!(m.bmat[(0, 1)] * m.bmat[(1, 1)] < 0.0);
    }

    #[test]
    fn pair_coupling_closed_form() {
        let modes = normal_modes(2).unwrap();
        let eta = LambDickeMatrix::from_base(0.02, &modes);
        let j = coupling_matrix(&eta, &modes).unwrap();
        assert!((j.j[(0, 1)] - 0.02f64.powi(2) / 3.0).abs() < 1e-15);
        assert_eq!(j.j[(0, 0)], 0.0);
    }

    #[test]
    fn zero_gradient_gives_zero_eta() {
        let cfg = ChainConfig::yb171(3, 2.0 * PI * 2e5, 0.0);
        let modes = chain_modes(&cfg).unwrap();
        let eta = lamb_dicke(&cfg, &modes).unwrap();
        assert!(eta.eta.iter().all(|&x| x == 0.0));
        let j = coupling_matrix(&eta, &modes).unwrap();
        assert!(gate_time(&j, GateKind::Multi).is_err());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(normal_modes(1).is_err());
        assert!(normal_modes(11).is_err());
    }
}
