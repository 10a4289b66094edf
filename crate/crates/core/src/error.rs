use thiserror::Error;

/// Errors produced by the toolkit.
///
/// The variants are grouped by who is at fault: malformed or inconsistent
/// inputs (`Parse`, `Validation`), bad caller arguments (`InvalidArgument`),
/// and broken internal invariants (`Invariant`), which always indicate a bug.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn parse(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            locus: locus.into(),
            message: message.into(),
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        match err.classify() {
            serde_json::error::Category::Io => Error::Io(err.into()),
            _ => Error::parse(
                format!("line {}, column {}", err.line(), err.column()),
                err.to_string(),
            ),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
