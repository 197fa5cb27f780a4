// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("segmentation infeasible: {0}")]
    Infeasible(String),

    #[error("Fisher information is singular at the null estimate; consider a ridge penalty or check the model specification")]
    SingularInformation,

    #[error("candidate pool has {have} breakpoints but {need} are required; use a deeper binary segmentation or a smaller fused-lasso penalty")]
    PoolTooSmall { have: usize, need: usize },

    #[error("exhaustive search needs {count} segmentations (guard {guard}); use max-EM instead")]
    GuardExceeded { count: u128, guard: u128 },

    #[error("unknown preset '{name}'; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
