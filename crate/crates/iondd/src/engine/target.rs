use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::CouplingMatrix;
use crate::engine::hilbert::HilbertSpec;
use crate::engine::state::QuantumState;
use crate::engine::IonSystem;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::modulation::{spin_phases, ModulationProfile, PhaseModel};
use crate::pulses::PulseSequence;
use crate::spin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// (|++⟩ + i|−−⟩)/√2, two qubits only.
    Bell,
    /// exp(i Σ_{i≠j} J_ij t σ^z_iσ^z_j)|+⟩^⊗N.
    Ising,
}

impl FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bell" => Ok(Self::Bell),
            "ising" => Ok(Self::Ising),
            _ => Err(Error::Parse(format!("unknown target kind `{s}` (expected bell or ising)"))),
        }
    }
}

/// Spin-sector target state at time `t` of the ideal Ising evolution.
pub fn target_state(coupling: &CouplingMatrix, t: f64, kind: TargetKind) -> Result<QuantumState> {
    let n = coupling.n_ions();
    let spec = HilbertSpec::new(n, Vec::new())?;
    let psi = match kind {
        TargetKind::Bell => {
            if n != 2 {
                return Err(Error::invalid("the Bell target is defined for two qubits"));
            }
            spin::bell_state()
        }
        TargetKind::Ising => spin::apply_diagonal_phases(&spin::plus_state(n), |s| {
            let mut ph = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        ph += coupling.j[(i, j)] * t * spin::z(s, i, n) * spin::z(s, j, n);
                    }
                }
            }
            ph
        }),
    };
    QuantumState::pure(spec, psi)
}

/// Single-qubit phases λ_k that the protocol imprints alongside the gate:
/// the dynamics produce exp(i Σ_k λ_k σ^z_k) on top of the Ising target.
pub fn local_phases(system: &IonSystem, seq: Option<&PulseSequence>, t: f64) -> Vec<f64> {
    let profile = ModulationProfile::new(seq, t);
    spin_phases(&profile, &system.eta, &system.modes, t, PhaseModel::default()).linear
}

/// exp(i Σ_k λ_k σ^z_k) ψ.
pub fn with_local_phases(psi: &CVector, lambda: &[f64]) -> CVector {
    let n = lambda.len();
    spin::apply_diagonal_phases(psi, |s| (0..n).map(|k| lambda[k] * spin::z(s, k, n)).sum())
}
