use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A code of the requested exact length cannot hold the content.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    /// An exhaustive check was requested above the hard scale guard.
    #[error("scale guard exceeded: {0}")]
    Scale(String),
    /// A search space was exhausted without a witness.
    #[error("not found: {0}")]
    NotFound(String),
    /// A textual artifact could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
