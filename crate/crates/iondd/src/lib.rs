//! Simulation of mode-mediated spin-spin gates in trapped-ion chains with
//! longitudinal (magnetic-gradient) coupling, protected by pulsed XY8
//! dynamical decoupling with per-block global phases.

pub mod analytic;
pub mod chain;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod modulation;
pub mod par;
pub mod pulses;
pub mod rng;
pub mod spin;
pub mod units;

pub use error::{Error, Result};
