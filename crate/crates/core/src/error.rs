use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LvggmError>;

#[derive(Debug, Error)]
pub enum LvggmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("non-finite entries in {0}")]
    NonFinite(String),

    #[error("solver produced a non-finite iterate in the {update} at iteration {iteration}")]
    SolverNonFinite {
        update: &'static str,
        iteration: usize,
    },

    #[error("energy ratio {target} is unattainable; achievable range is [{min}, {max})")]
    UnattainableRatio { target: f64, min: f64, max: f64 },

    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LvggmError {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LvggmError::NotPositiveDefinite(_)
                | LvggmError::NonFinite(_)
                | LvggmError::SolverNonFinite { .. }
                | LvggmError::UnattainableRatio { .. }
        )
    }
}
