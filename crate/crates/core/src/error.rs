use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The N-th singular value of a device channel is below the precoder threshold.
    #[error("device {device_id}: channel ill-conditioned (sigma_N = {sigma:e} < {threshold:e})")]
    IllConditionedChannel {
        device_id: usize,
        sigma: f64,
        threshold: f64,
    },

    #[error("device {device_id}: alignment matrix singular (condition number {condition:e})")]
    AlignmentSingular { device_id: usize, condition: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate model: {0}")]
    ModelDegenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// True for errors caused by the run description rather than the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
