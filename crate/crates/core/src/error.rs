//! Crate error type.

use thiserror::Error;

/// Errors surfaced by the numeric core.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Vector/matrix dimensions disagree with what the operation expects.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// An argument is outside its admissible range.
    #[error("invalid argument {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// Operation requires an origin-symmetric decision set.
    #[error("unsupported decision set: {0}")]
    UnsupportedSet(String),

    /// A mixing matrix or graph sequence violates its structural contract.
    #[error("invalid mixing matrix: {0}")]
    InvalidMixing(String),

    /// The comparator solver could not certify a feasible benchmark point.
    #[error("infeasible comparator: residual {residual} exceeds tolerance {tolerance}")]
    InfeasibleComparator { residual: f64, tolerance: f64 },

    /// A numeric contract failed at runtime (invariant breach, NaN, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<V> = std::result::Result<V, CoreError>;

impl CoreError {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        CoreError::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        CoreError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
