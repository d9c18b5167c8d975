use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the region where the operation is defined
    /// (a point on a branch cut, outside a strip, at a pole).
    #[error("domain error: {0}")]
    Domain(String),
    /// Parameters that violate the constraints of a model, payoff or plan.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A case the library deliberately does not handle.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Quadrature, root finding or contour validation failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
