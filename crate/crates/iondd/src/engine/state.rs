use crate::engine::hilbert::HilbertSpec;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Pure(CVector),
    Mixed(CMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub data: StateData,
    pub spec: HilbertSpec,
}

impl QuantumState {
    pub fn pure(spec: HilbertSpec, psi: CVector) -> Result<Self> {
        if psi.len() != spec.dim() {
            return Err(Error::invalid(format!("state length {} ≠ dimension {}", psi.len(), spec.dim())));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { data: StateData::Pure(psi), spec })
    }

    pub fn mixed(spec: HilbertSpec, rho: CMatrix) -> Result<Self> {
        if rho.nrows() != spec.dim() || rho.ncols() != spec.dim() {
            return Err(Error::invalid("density matrix shape does not match the Hilbert space"));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::invalid(format!("density matrix trace {tr} differs from 1")));
        }
        let herm = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::invalid(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        Ok(Self { data: StateData::Mixed(rho), spec })
    }

    /// |spin⟩ ⊗ |n_1 … n_K⟩.
    pub fn product(spec: HilbertSpec, spin: &CVector, fock: &[usize]) -> Result<Self> {
        if spin.len() != spec.spin_dim() {
            return Err(Error::invalid("spin vector length does not match the qubit count"));
        }
        let k = spec.fock_index(fock)?;
        let dm = spec.mode_dim();
        let mut psi = CVector::zeros(spec.dim());
        for s in 0..spec.spin_dim() {
            psi[s * dm + k] = spin[s];
        }
        Self::pure(spec, psi)
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.data {
            StateData::Pure(psi) => psi * psi.adjoint(),
            StateData::Mixed(rho) => rho.clone(),
        }
    }

    /// ‖ψ‖ for pure states, Tr ρ for mixed ones.
    pub fn norm(&self) -> f64 {
        match &self.data {
            StateData::Pure(psi) => psi.norm(),
            StateData::Mixed(rho) => rho.trace().re,
        }
    }

    /// Partial trace over all modes.
    pub fn reduced_spin(&self) -> CMatrix {
        let ds = self.spec.spin_dim();
        let dm = self.spec.mode_dim();
        match &self.data {
            StateData::Pure(psi) => reduce_pure(psi.as_slice(), ds, dm),
            StateData::Mixed(rho) => CMatrix::from_fn(ds, ds, |s, t| (0..dm).map(|k| rho[(s * dm + k, t * dm + k)]).sum()),
        }
    }

    /// ⟨a_m† a_m⟩.
    pub fn mode_occupation(&self, m: usize) -> f64 {
        let occ = self.spec.occupations(m);
        let dm = self.spec.mode_dim();
        let n_of = |i: usize| occ[i % dm] as f64;
        match &self.data {
            StateData::Pure(psi) => psi.iter().enumerate().map(|(i, a)| a.norm_sqr() * n_of(i)).sum(),
            StateData::Mixed(rho) => (0..rho.nrows()).map(|i| rho[(i, i)].re * n_of(i)).sum(),
        }
    }
}

/// Tr_M |ψ⟩⟨ψ| for a spin-major amplitude slice.
pub fn reduce_pure(psi: &[crate::linalg::C64], ds: usize, dm: usize) -> CMatrix {
    CMatrix::from_fn(ds, ds, |s, t| {
        let a = &psi[s * dm..(s + 1) * dm];
        let b = &psi[t * dm..(t + 1) * dm];
        a.iter().zip(b).fold(c(0.0, 0.0), |acc, (x, y)| acc + x * y.conj())
    })
}
