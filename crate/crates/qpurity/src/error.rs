//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong when validating inputs or running a check.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |m - m^dag| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("trace must be 1, got {trace:.12} (|trace - 1| = {deviation:.3e} exceeds {tolerance:.3e})")]
    TraceNotOne {
        trace: f64,
        deviation: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e} < -{tolerance:.3e}")]
    NotPsd {
        min_eigenvalue: f64,
        tolerance: f64,
    },

    #[error("size {size} exceeds the configured cap {cap}")]
    SizeLimit { size: usize, cap: usize },

    #[error("invalid subsystem subset: {reason}")]
    InvalidSubset { reason: String },

    #[error("invalid partition: {reason}")]
    InvalidPartition { reason: String },

    #[error("local dimension must be at least 2, got {dim}")]
    InvalidDimension { dim: usize },

    #[error("dimension mismatch: {reason}")]
    DimensionMismatch { reason: String },

    #[error("purity map has no entry for subset {subset:?}")]
    IncompleteMap { subset: Vec<usize> },

    #[error("purity {value} outside the admissible range [{lo}, {hi}]")]
    InvalidPurity { value: f64, lo: f64, hi: f64 },

    #[error("criterion not applicable: {reason}")]
    Inapplicable { reason: String },

    #[error("invalid measurement frame: {reason}")]
    InvalidFrame { reason: String },

    #[error("invalid parameter: {reason}")]
    InvalidParameter { reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand constructors for the string-carrying variants.
    pub fn subset(reason: impl Into<String>) -> Self {
        Error::InvalidSubset {
            reason: reason.into(),
        }
    }

    pub fn partition(reason: impl Into<String>) -> Self {
        Error::InvalidPartition {
            reason: reason.into(),
        }
    }

    pub fn mismatch(reason: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            reason: reason.into(),
        }
    }

    pub fn inapplicable(reason: impl Into<String>) -> Self {
        Error::Inapplicable {
            reason: reason.into(),
        }
    }

    pub fn frame(reason: impl Into<String>) -> Self {
        Error::InvalidFrame {
            reason: reason.into(),
        }
    }

    pub fn parameter(reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            reason: reason.into(),
        }
    }
}
