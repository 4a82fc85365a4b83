use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The request is valid but outside what the solvers support.
    #[error("unsupported: {0}")]
    Capability(String),
    /// A solver precondition does not hold; the caller should fall back.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Root finding or bracketing failed.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
