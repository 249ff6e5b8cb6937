use thiserror::Error;

/// Errors produced by the twirling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwirlError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),
    #[error("dimension overflow computing {0}")]
    Overflow(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, TwirlError>;

impl From<std::io::Error> for TwirlError {
    fn from(e: std::io::Error) -> Self {
        TwirlError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for TwirlError {
    fn from(e: serde_json::Error) -> Self {
        TwirlError::Parse(e.to_string())
    }
}
