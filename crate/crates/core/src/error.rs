use thiserror::Error;

/// Errors raised by the library.
///
/// Inequality violations are never errors; they are reported through the
/// margin fields of the report types.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid, length or dimension mismatch between inputs.
    #[error("structural error: {0}")]
    Structural(String),
    /// A numeric parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A mathematical hypothesis of the requested estimate does not hold.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed or unsupported file content.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
