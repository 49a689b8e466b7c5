use thiserror::Error;

/// Errors surfaced by the library.
///
/// Zero-norm events are not errors: they are ordinary outcomes of sampling and
/// are reported through [`crate::LogNorm::Zero`] and batch counters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("entry law is not normalized: {0}")]
    Normalization(String),

    #[error("entry law is not symmetric about zero: {0}")]
    Asymmetry(String),

    #[error("entry law has atoms, which is not allowed here: {0}")]
    AtomBearingLaw(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("budget exceeded: estimated cost {estimate} exceeds budget {budget}")]
    BudgetExceeded { estimate: u128, budget: u128 },

    #[error("insufficient samples: need at least {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("empty batch")]
    EmptyBatch,
}

pub type Result<T> = std::result::Result<T, Error>;
