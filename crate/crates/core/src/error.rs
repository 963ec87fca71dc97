use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical or physical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The requested configuration lies outside the supported physical regime.
    #[error("unsupported regime: {0}")]
    Unsupported(String),

    /// Model inputs violate one or more constraints.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    /// A documented invariant of an intermediate quantity was broken.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
