use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a precondition (non-finite samples, out-of-range parameter, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Two inputs that must agree in shape do not.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    /// A computation produced NaN/inf or otherwise failed at runtime.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested operation needs a capability the model does not expose.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed container or JSON document.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
