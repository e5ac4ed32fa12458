use thiserror::Error;

/// Errors raised by the surrogate-modeling pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum S2kError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation matrix is not positive definite even with nugget {nugget:e}")]
    IllConditionedKernel { nugget: f64 },

    #[error("unfittable data: {0}")]
    UnfittableData(String),

    #[error("pattern search rejected its start: objective is infinite at the start and every probe")]
    RejectedStart,

    #[error("step size underflow at t = {t}: the system appears stiff")]
    Stiffness { t: f64 },

    #[error("emulation diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("ensemble failed: {divergent} of {total} replicates diverged")]
    EnsembleFailure { divergent: usize, total: usize },

    #[error("relative error undefined: reference history is constant")]
    UndefinedDenominator,

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed data: {0}")]
    Format(String),
}

impl S2kError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        S2kError::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for S2kError {
    fn from(e: std::io::Error) -> Self {
        S2kError::Io(e.to_string())
    }
}

impl From<csv::Error> for S2kError {
    fn from(e: csv::Error) -> Self {
        S2kError::Format(e.to_string())
    }
}

impl From<serde_json::Error> for S2kError {
    fn from(e: serde_json::Error) -> Self {
        S2kError::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, S2kError>;
