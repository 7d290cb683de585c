use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge (residual {residual:.3e})")]
    Convergence { what: &'static str, residual: f64 },

    #[error("Hilbert-space dimension {dim} exceeds budget {budget}")]
    BudgetExceeded { dim: usize, budget: usize },

    #[error("non-physical state: minimum eigenvalue {min_eigenvalue:.3e}")]
    NonPhysical { min_eigenvalue: f64 },

    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("could not bracket target phase {target:.6} rad; accumulated phase curve (tau_s, phase): {curve:?}")]
    Bracket { target: f64, curve: Vec<(f64, f64)> },

    #[error("thermal tail mass {tail:.3e} exceeds tolerance {tol:.1e} at cutoff {cutoff}")]
    ThermalTail { tail: f64, tol: f64, cutoff: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("scenario parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Validation problems are the caller's fault; everything else is numerical.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Parse(_) | Error::BudgetExceeded { .. } | Error::ThermalTail { .. }
        )
    }
}
