use thiserror::Error;

/// Errors surfaced by model construction, engines, and analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("kernel structure error: {0}")]
    KernelStructure(String),

    #[error("exact engine requires rational inputs: {0}")]
    NonRationalInput(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
