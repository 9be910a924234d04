use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid preferences")]
    InvalidPreferences,

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid risk weights: {0}")]
    InvalidWeights(String),

    #[error("invalid learning rate: {0}")]
    InvalidSchedule(String),

    #[error("batch too small for variance")]
    BatchTooSmall,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("divergence at step {step}: preference {value} on arm {arm}")]
    Divergence { step: u64, arm: usize, value: f64 },

    #[error("no completed runs to aggregate")]
    EmptyAggregate,

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
