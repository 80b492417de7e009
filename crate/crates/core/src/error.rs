use thiserror::Error;

use crate::models::ModelError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} has {count} samples; sample variance needs at least 2")]
    UndefinedVariance { level: usize, count: u64 },

    #[error("cannot merge accumulators of level {left} and level {right}")]
    LevelMismatch { left: usize, right: usize },

    #[error("non-finite {what} ({value}) on level {level}")]
    NonFiniteSample {
        level: usize,
        what: &'static str,
        value: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("checkpoint: {0}")]
    Checkpoint(#[from] serde_json::Error),
}
