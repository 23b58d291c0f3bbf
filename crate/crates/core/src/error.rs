use thiserror::Error;

/// Errors produced by the numerical routines and the CLI plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("M-Wright order nu = 1 is the Dirac mass at 1 and has no pointwise value")]
    DiracOrder,

    #[error("{what} did not converge (error estimate {estimate:e})")]
    NonConvergence { what: &'static str, estimate: f64 },

    #[error("initial condition under-resolved: {0}")]
    Resolution(String),

    #[error("nonfinite kernel weight: {0}")]
    Singularity(String),

    #[error("linear solve failed: {0}")]
    LinAlg(String),

    #[error("parameters do not match the requested reduction: {0}")]
    ParamMismatch(String),

    #[error("level {level} needs at least {needed} recorded levels of history")]
    InsufficientHistory { level: usize, needed: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("table error: {0}")]
    Table(String),

    #[error("covariance matrix is not positive definite even after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("ensemble has {got} paths, at least {needed} are required")]
    InsufficientPaths { got: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Singularity(_)
                | Error::LinAlg(_)
                | Error::NotPositiveDefinite { .. }
                | Error::Table(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
