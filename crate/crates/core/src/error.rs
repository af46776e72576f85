use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite coefficient value at x = {x:?}, y = {y:?}")]
    Evaluation { x: Vec<f64>, y: Vec<f64> },

    #[error("integration diverged at t = {time}: last finite state x = {x:?}, y = {y:?}")]
    Integration { time: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("forced solution left its half-space at t = {time} (forcing too large)")]
    StabilityViolation { time: f64 },

    #[error("sampler did not converge: {0}")]
    Sampling(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for the errors caused by bad inputs rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Domain(_) | Error::Precondition(_) | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
