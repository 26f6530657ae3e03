use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension k = {k} outside supported range 1..={max}")]
    DimensionOutOfRange { k: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entry {index} must be finite and strictly positive, got {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("probability vector must be non-increasing (p_1 >= ... >= p_k)")]
    NonMonotone,

    #[error("weights must be non-decreasing after canonicalization")]
    UnsortedWeights,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Gauss-Seidel did not converge at level {level} within {sweeps} sweeps")]
    NotConverged { level: usize, sweeps: usize },

    #[error("zero pivot at level {level}, row {row}: system is not diagonally dominant")]
    Singular { level: usize, row: usize },

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
