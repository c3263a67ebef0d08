//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by system construction, evaluation and stepping.
#[derive(Debug, Error)]
pub enum PhsError {
    /// A vector or matrix did not have the dimension demanded by the contract.
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A non-finite value (NaN or infinity) was encountered where a finite
    /// number is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Invalid configuration (bad tableau, negative coefficients, singular
    /// mass matrix, mismatched ports, ...).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The implicit solver did not reach the requested tolerance.
    #[error("implicit solver failed after {iterations} iterations, residual {residual:.3e}")]
    SolverFailure { iterations: usize, residual: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, PhsError>;
