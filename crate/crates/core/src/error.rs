use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a cycle needs at least 2 sites, got {0}")]
    InvalidSize(usize),

    #[error("coin angle {0} is outside [0, pi/2]")]
    InvalidAngle(f64),

    #[error("disorder strength {0} must be finite and non-negative")]
    InvalidDisorder(f64),

    #[error("shape mismatch: expected {expected} sites, got {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("step count must be at least 1")]
    InvalidSteps,

    #[error("{0}: empty input")]
    EmptyData(&'static str),

    #[error("invalid bin specification: {0}")]
    InvalidBins(String),

    #[error("unknown fraction mode `{0}` (expected timestep, cell or realization)")]
    UnknownMode(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("critical disorder not bracketed by the scan ({0})")]
    BoundaryNotBracketed(String),

    #[error("power-law fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("power-law fit needs positive values, got ({0}, {1})")]
    NonPositive(f64, f64),

    #[error("out of memory allocating {0} probability cells")]
    ResourceExhausted(usize),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidSize(_)
                | Error::InvalidAngle(_)
                | Error::InvalidDisorder(_)
                | Error::InvalidSteps
                | Error::InvalidBins(_)
                | Error::UnknownMode(_)
                | Error::InvalidConfig(_)
        )
    }
}
