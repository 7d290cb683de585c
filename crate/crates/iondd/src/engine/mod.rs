//! Numerical evolution on qubits ⊗ truncated Fock modes.
//!
//! Two independent propagators are provided: [`evolve_schrodinger`] and
//! [`evolve_lindblad`] integrate the interaction-picture equations with an
//! adaptive Runge–Kutta scheme, while [`SequencePropagator`] advances a
//! batch of pure states exactly segment by segment (free evolution
//! factorised per spin configuration and mode; pulses through a dense
//! eigendecomposition). Both report states in the interaction picture with
//! respect to Σ ν_m a_m†a_m.

pub mod fidelity;
pub mod hamiltonian;
pub mod heating;
pub mod hilbert;
pub mod lindblad;
pub mod ode;
pub mod propagator;
pub mod schrodinger;
pub mod sparse;
pub mod state;
pub mod target;
pub mod thermal;

pub use fidelity::{spin_fidelity, state_fidelity};
pub use hamiltonian::{build_interaction_hamiltonian, InteractionOperator};
pub use heating::{bath_occupation, heating_rates, HeatingReference, HeatingReferences};
pub use hilbert::HilbertSpec;
pub use lindblad::{evolve_lindblad, evolve_lindblad_rk, LindbladOptions};
pub use propagator::{simulate_thermal, thermal_run, PropagatorOptions, SequencePropagator, ThermalRun};
pub use schrodinger::{evolve_schrodinger, SchrodingerOptions};
pub use state::{QuantumState, StateData};
pub use target::{target_state, TargetKind};
pub use thermal::{thermal_state, FockBranch, ThermalMixture};

use crate::chain::{coupling_matrix, CouplingMatrix, LambDickeMatrix, ModeData};
use crate::error::{Error, Result};
use crate::spin;

/// Chain modes with their Lamb-Dicke factors; frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSystem {
    pub modes: ModeData,
    pub eta: LambDickeMatrix,
}

impl IonSystem {
    pub fn new(modes: ModeData, eta: LambDickeMatrix) -> Result<Self> {
        if eta.n_ions() != modes.n_ions() || eta.n_modes() != modes.n_modes() {
            return Err(Error::invalid("Lamb-Dicke matrix does not match the mode data"));
        }
        Ok(Self { modes, eta })
    }

    /// Axial modes of an `n`-ion chain at trap frequency `nu` with base factor `eta`.
    pub fn uniform(n: usize, nu: f64, eta: f64) -> Result<Self> {
        let modes = crate::chain::normal_modes(n)?.with_trap_frequency(nu);
        let eta = LambDickeMatrix::from_base(eta, &modes);
        Self::new(modes, eta)
    }

    pub fn n_qubits(&self) -> usize {
        self.modes.n_ions()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.n_modes()
    }

    pub fn coupling(&self) -> Result<CouplingMatrix> {
        coupling_matrix(&self.eta, &self.modes)
    }

    /// c_{s,m} = Σ_j η_jm (1 + σ^z_j) for spin configuration `s`.
    pub fn displacement_coefficient(&self, s: usize, m: usize) -> f64 {
        let n = self.n_qubits();
        (0..n).map(|j| self.eta.eta[(j, m)] * (1.0 + spin::z(s, j, n))).sum()
    }
}

/// Heating of one mode: rate Γ_m (1/s) towards bath occupation N̄_m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeHeating {
    pub gamma: f64,
    pub nbar_bath: f64,
}

impl ModeHeating {
    /// ṅ ≈ Γ N̄.
    pub fn rate(&self) -> f64 {
        self.gamma * self.nbar_bath
    }
}

/// Static errors and motional heating.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Qubit shift ε in Σ_j (ε/2)σ^z_j, rad/s.
    pub eps: f64,
    /// Rabi-frequency offset δΩ, rad/s.
    pub d_omega: f64,
    /// Empty for a closed system.
    pub heating: Vec<ModeHeating>,
    /// Bath temperature, K.
    pub temperature: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { eps: 0.0, d_omega: 0.0, heating: Vec::new(), temperature: heating::ROOM_TEMPERATURE }
    }
}

impl NoiseModel {
    pub fn static_errors(eps: f64, d_omega: f64) -> Self {
        Self { eps, d_omega, ..Self::default() }
    }

    /// Heating from rates ṅ_m (phonons/s), with N̄_m set by the bath temperature.
    pub fn with_heating_rates(mut self, rates: &[f64], freqs: &[f64]) -> Result<Self> {
        if rates.len() != freqs.len() {
            return Err(Error::invalid("one heating rate per mode is required"));
        }
        if rates.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::invalid("heating rates must be non-negative"));
        }
        self.heating = rates
            .iter()
            .zip(freqs)
            .map(|(&r, &nu)| {
                let nbar_bath = bath_occupation(nu, self.temperature);
                ModeHeating { gamma: r / nbar_bath, nbar_bath }
            })
            .collect();
        Ok(self)
    }

    pub fn is_closed(&self) -> bool {
        self.heating.iter().all(|h| h.gamma == 0.0)
    }

    pub fn validate(&self, n_modes: usize) -> Result<()> {
        if !self.eps.is_finite() || !self.d_omega.is_finite() {
            return Err(Error::invalid("noise parameters must be finite"));
        }
        if !self.heating.is_empty() && self.heating.len() != n_modes {
            return Err(Error::invalid(format!("{} heating entries for {n_modes} modes", self.heating.len())));
        }
        if self.heating.iter().any(|h| !(h.gamma >= 0.0) || !(h.nbar_bath >= 0.0)) {
            return Err(Error::invalid("heating rates and bath occupations must be non-negative"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        Ok(())
    }
}
