//! Spin-register conventions.
//!
//! Qubit `j` of an `n`-qubit register is bit `n − 1 − j` of the spin index,
//! with bit value 0 for |e⟩ (σ^z = +1) and 1 for |g⟩ (σ^z = −1). For two
//! qubits the order is therefore (ee, eg, ge, gg).

use crate::linalg::{c, C64, CVector};

/// σ^z eigenvalue of qubit `j` in spin configuration `s`.
#[inline]
pub fn z(s: usize, j: usize, n: usize) -> f64 {
    if (s >> (n - 1 - j)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Σ_j σ^z_j eigenvalue of configuration `s`.
#[inline]
pub fn total_z(s: usize, n: usize) -> f64 {
    (0..n).map(|j| z(s, j, n)).sum()
}

/// (1 + σ^z_j)/2 eigenvalue: 1 if qubit `j` is excited.
#[inline]
pub fn excited(s: usize, j: usize, n: usize) -> f64 {
    0.5 * (1.0 + z(s, j, n))
}

/// |+⟩^⊗n with σ^x|±⟩ = ±|±⟩.
pub fn plus_state(n: usize) -> CVector {
    let d = 1 << n;
    CVector::from_element(d, c((d as f64).powf(-0.5), 0.0))
}

/// (|++⟩ + i|−−⟩)/√2.
pub fn bell_state() -> CVector {
    let a = 0.5 * 0.5f64.sqrt();
    CVector::from_vec(vec![c(a, a), c(a, -a), c(a, -a), c(a, a)])
}

/// Applies exp(i Σ_s φ_s |s⟩⟨s|) given per-configuration phases.
pub fn apply_diagonal_phases(psi: &CVector, phases: impl Fn(usize) -> f64) -> CVector {
    CVector::from_fn(psi.len(), |s, _| psi[s] * C64::from_polar(1.0, phases(s)))
}
