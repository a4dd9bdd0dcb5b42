use thiserror::Error;

/// Errors produced by density evaluation, fitting and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid data: {message}; offending indices {indices:?}")]
    InvalidData { message: String, indices: Vec<usize> },

    #[error("quadrature failed to converge for {context}: estimate {estimate}, error estimate {abs_error:e}")]
    Quadrature {
        context: String,
        estimate: f64,
        abs_error: f64,
    },

    #[error("optimization failed: {0}")]
    Optimizer(String),

    #[error("covariance matrix is not available for this fit")]
    MissingCovariance,

    #[error("rejection sampler acceptance rate {rate:e} is too low; review the parameters")]
    LowAcceptance { rate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
