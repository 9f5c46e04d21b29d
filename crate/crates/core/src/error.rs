use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value outside support: {0}")]
    OutOfSupport(String),

    #[error("invalid dependence coefficients: {0}")]
    InvalidDependence(String),

    #[error("infeasible prior configuration: {0}")]
    Infeasible(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("not enough posterior draws: need at least {needed}, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
