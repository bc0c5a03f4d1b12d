use std::io;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in field at index {0}")]
    NonFinite(usize),

    #[error("field format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("direct potential refuses n = {0} (limit 32)")]
    TooLarge(usize),

    #[error("negative potential dust {min:e} exceeds -1e-12 * max ({max:e})")]
    NegativeDust { min: f64, max: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
