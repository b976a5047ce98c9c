use thiserror::Error;

/// Errors raised by the coding and pipeline primitives.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that must have full row rank does not.
    #[error("rank deficiency: expected rank {expected}, found {found}")]
    Rank { expected: usize, found: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A character that cannot be carried by the fixed-rate source code.
    #[error("character {ch:?} at offset {offset} is not encodable")]
    Encoding { offset: usize, ch: char },

    #[error("provider error: {0}")]
    Provider(String),

    #[error("extraction failed for segment {segment}: no valid candidate")]
    Extraction { segment: usize },

    #[error("retransmission budget exhausted: need {needed} bits, {remaining} remaining")]
    Budget { needed: usize, remaining: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
