//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("increment {epsilon} is not an integer multiple of grid step {grid_step}")]
    OffGridIncrement { epsilon: f64, grid_step: f64 },

    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),

    #[error("head {head} has no phase group assignment")]
    UnassignedHead { head: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

/// Shorthand for `Err(Error::InvalidArgument(...))` construction sites.
pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
