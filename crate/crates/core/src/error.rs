use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// A fixed-width counter overflowed. Callers that can fall back to
    /// arbitrary precision catch this; it should never reach a user.
    #[error("counter overflow")]
    Overflow,

    #[error("internal consistency: {0}")]
    Inconsistent(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn resource(msg: impl Into<String>) -> Self {
        Error::ResourceLimit(msg.into())
    }
}
