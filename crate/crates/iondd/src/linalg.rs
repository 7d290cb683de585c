//! Small dense helpers shared by the analytic and numerical paths.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// e^{iφ}.
#[inline]
pub fn cis(phi: f64) -> C64 {
    C64::new(phi.cos(), phi.sin())
}

/// Matrix exponential (scaling and squaring with a Padé kernel).
pub fn expm(a: &CMatrix) -> CMatrix {
    a.clone().exp()
}

/// Real-matrix analogue of [`expm`].
pub fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

/// Truncated annihilation operator on {|0⟩, …, |n_max⟩}.
pub fn annihilation(n_max: usize) -> DMatrix<f64> {
    let d = n_max + 1;
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

/// Truncated displacement operator exp(β a† − β* a).
pub fn displacement(beta: C64, n_max: usize) -> CMatrix {
    let a = annihilation(n_max).map(|x| C64::new(x, 0.0));
    let gen = a.transpose() * beta - &a * beta.conj();
    expm(&gen)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &CMatrix) -> f64 {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
