//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors surfaced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions do not conform.
    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },

    /// A triangular or elimination pivot fell below the singularity tolerance.
    #[error("singular system: pivot {index} has magnitude {value:e}")]
    Singular { index: usize, value: f64 },

    /// The matrix does not have full column rank where a full-rank
    /// factorization or solve was requested.
    #[error("rank deficient: rank {rank} < {cols} columns; {hint}")]
    RankDeficient {
        rank: usize,
        cols: usize,
        hint: &'static str,
    },

    /// A symmetric matrix failed the positive-definiteness check.
    #[error("matrix not positive definite (min/max eigenvalue ratio {ratio:e})")]
    NotPositiveDefinite { ratio: f64 },

    /// Invalid argument values (negative tolerances, bad counts, ...).
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A NaN or infinity reached a public operation.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// An iterative routine failed to converge within its budget.
    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    /// Parse failure for the matrix text format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, details: impl Into<String>) -> Self {
        Error::Shape {
            op,
            details: details.into(),
        }
    }

    pub(crate) fn invalid(details: impl Into<String>) -> Self {
        Error::Invalid(details.into())
    }
}
