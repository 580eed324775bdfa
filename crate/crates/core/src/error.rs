use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported dimension {dim}: at most {max} supported")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("search bracket exhausted: {0}")]
    BracketExhausted(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from bad user input rather than a failure
    /// while running.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::BracketExhausted(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::DegenerateModel(_) => "degenerate_model",
            Error::BracketExhausted(_) => "bracket_exhausted",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
