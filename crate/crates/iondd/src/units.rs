//! Physical constants (SI) and unit helpers.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Electron gyromagnetic ratio γ_e = g μ_B / ħ in rad s⁻¹ T⁻¹.
pub const GAMMA_E: f64 = 1.760_859_630_23e11;
pub const YB171_MASS: f64 = 170.936_325_8 * AMU;

/// Converts a frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

#[inline]
pub fn khz(f: f64) -> f64 {
    hz(f * 1e3)
}

/// Converts rad/s back to Hz.
#[inline]
pub fn to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}
