use crate::engine::state::{QuantumState, StateData};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// F = |Tr(ρ₁ρ₂†)| / √(Tr(ρ₁ρ₁†) Tr(ρ₂ρ₂†)); pure states are promoted.
pub fn state_fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.spec != b.spec {
        return Err(Error::invalid(format!("Hilbert spaces differ: {} vs {}", a.spec.dim(), b.spec.dim())));
    }
    Ok(match (&a.data, &b.data) {
        (StateData::Pure(x), StateData::Pure(y)) => {
            let ov = x.dotc(y).norm_sqr();
            ov / (x.norm_squared() * y.norm_squared())
        }
        (StateData::Mixed(r), StateData::Pure(p)) | (StateData::Pure(p), StateData::Mixed(r)) => spin_fidelity(r, p),
        (StateData::Mixed(r1), StateData::Mixed(r2)) => {
            let num = (r1 * r2.adjoint()).trace().norm();
            let d1 = (r1 * r1.adjoint()).trace().re;
            let d2 = (r2 * r2.adjoint()).trace().re;
            num / (d1 * d2).sqrt()
        }
    })
}

/// The same measure for a density matrix against a pure target.
pub fn spin_fidelity(rho: &CMatrix, target: &CVector) -> f64 {
    let num = target.dotc(&(rho * target)).norm();
    let purity = (rho * rho.adjoint()).trace().re;
    num / (purity.sqrt() * target.norm_squared())
}
