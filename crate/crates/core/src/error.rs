use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("conjugate gradient did not converge at step {step}: relative residual {residual:e} after {iterations} iterations")]
    SolverFailure {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite value in {field} at step {step}")]
    NonFinite { field: &'static str, step: usize },

    #[error("thresholded tumor region is empty")]
    EmptyRegion,

    #[error("unknown parameter `{0}` (expected one of kappa1, alpha, beta1, beta2, gamma, delta)")]
    UnknownParameter(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("metrics series is empty")]
    EmptySeries,

    #[error("invalid metrics row at t={time}: {reason}")]
    InvalidSample { time: f64, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
