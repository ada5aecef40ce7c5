use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("row {row} has zero norm")]
    DegenerateRow { row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged during {phase}: {detail}")]
    Diverged { phase: &'static str, detail: String },

    #[error("view file missing: {0}")]
    MissingView(PathBuf),

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    /// Failure inside a named pipeline phase.
    #[error("{phase}: {source}")]
    InPhase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Tags the error with `phase` unless it already names one.
    pub fn in_phase(self, phase: &'static str) -> Self {
        match self {
            e @ (Error::InPhase { .. } | Error::Diverged { .. }) => e,
            e => Error::InPhase {
                phase,
                source: Box::new(e),
            },
        }
    }

    /// The pipeline phase the error was raised in, if known.
    pub fn phase(&self) -> Option<&'static str> {
        match self {
            Error::InPhase { phase, .. } | Error::Diverged { phase, .. } => Some(phase),
            _ => None,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
