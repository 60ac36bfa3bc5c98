use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside its admissible range (bad shape, negative budget, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// An input violates a documented precondition (non-Hermitian, singular, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A requested computation exceeds the desk-scale size guard.
    #[error("size guard exceeded: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
