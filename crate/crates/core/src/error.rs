use thiserror::Error;

/// Errors produced by the laboratory.
///
/// Violations of matrix invariants are not errors: [`crate::sampler::validate`]
/// reports them as data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("resource budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("wrong regime: expected {expected}")]
    WrongRegime { expected: &'static str },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// Strips [`Error::Replicate`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Replicate { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_budget(what: &'static str, needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        Err(Error::Budget { what, needed, budget })
    } else {
        Ok(())
    }
}
