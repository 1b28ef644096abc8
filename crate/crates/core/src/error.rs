use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs are individually valid but inconsistent with each other.
    #[error("usage error: {0}")]
    Usage(String),
    /// A configuration violates a model constraint.
    #[error("configuration error: {0}")]
    Config(String),
    /// The Gaussian sampler could not factor its covariance.
    #[error("sampler error: {0}")]
    Sampler(String),
    /// A numerical policy was violated.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
