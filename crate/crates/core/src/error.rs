use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("matrix at time index {0} is not positive definite")]
    NotPositiveDefinite(usize),

    #[error("solver diverged at iteration {iteration}: non-finite iterate")]
    Diverged { iteration: usize },

    #[error("infeasible change-point placement: {0}")]
    Infeasible(String),

    #[error("empty candidate list")]
    EmptyCandidates,
}

pub type Result<T> = std::result::Result<T, Error>;
