use thiserror::Error;

use crate::state::PhaseSpacePoint;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected} field values, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("form factor hypotheses flagged for particle(s) {particles:?}: {reason}")]
    HypothesisFlagged { particles: Vec<usize>, reason: String },

    #[error("non-finite state after step {step} (t = {time})")]
    NonFinite {
        step: usize,
        time: f64,
        state: Box<PhaseSpacePoint>,
    },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("ensemble has no retained trajectories")]
    MissingTrajectories,

    #[error("form factor table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Walks through `Sample` wrappers to the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
