use thiserror::Error;

/// Failures surfaced by the library. Each variant maps onto one refusal
/// class so callers (the CLI in particular) can pick an exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no supercritical root: {0}")]
    NoSupercriticalRoot(String),

    #[error("ansatz refused: {0}")]
    Ansatz(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("window mismatch: {0}")]
    WindowMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
