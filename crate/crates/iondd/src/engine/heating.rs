//! Motional heating: bath occupations and the electrode-distance scaling of
//! heating rates.

use crate::error::{Error, Result};
use crate::units::{HBAR, K_B};

pub const ROOM_TEMPERATURE: f64 = 300.0;

/// N̄ = [exp(ħν/k_B T) − 1]⁻¹.
pub fn bath_occupation(nu: f64, temperature: f64) -> f64 {
    1.0 / (HBAR * nu / (K_B * temperature)).exp_m1()
}

/// Measured heating rate of one mode family in a reference trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingReference {
    /// ṅ_ref, phonons/s.
    pub rate: f64,
    /// ν_ref, rad/s.
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatingReferences {
    /// One entry per mode, in mode order.
    pub modes: Vec<HeatingReference>,
    /// Gradient of the reference trap, T/m.
    pub gradient: f64,
    /// Ion-electrode distance of the reference trap, m.
    pub distance: f64,
}

impl Default for HeatingReferences {
    /// Centre-of-mass and breathing-mode data of a 23.6 T/m trap at 310 μm.
    fn default() -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            modes: vec![
                HeatingReference { rate: 41.0, nu: tau * 426.7e3 },
                HeatingReference { rate: 1.3, nu: tau * 3f64.sqrt() * 1.1e6 },
            ],
            gradient: 23.6,
            distance: 310e-6,
        }
    }
}

/// ṅ_m = ṅ_ref,m (ν_ref,m/ν_m)² (d_ref/d)⁴ with d = d_ref √(g_ref/g_B).
pub fn heating_rates(nu: &[f64], gradient: f64, refs: &HeatingReferences) -> Result<Vec<f64>> {
    if nu.len() > refs.modes.len() {
        return Err(Error::invalid(format!("{} modes but only {} heating references", nu.len(), refs.modes.len())));
    }
    if !(gradient > 0.0) || nu.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("gradient and mode frequencies must be positive"));
    }
    let d = refs.distance * (refs.gradient / gradient).sqrt();
    let geometry = (refs.distance / d).powi(4);
    Ok(nu.iter().zip(&refs.modes).map(|(&v, r)| r.rate * (r.nu / v).powi(2) * geometry).collect())
}
