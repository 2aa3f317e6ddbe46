use thiserror::Error;

use crate::qp::{QpError, Status};

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("no valid gaze samples in input")]
    EmptyInput,
    #[error("{what} index {index} out of range 0..{len}")]
    Index { what: &'static str, index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("solver stopped with status {status} (primal residual {primal_residual:e}, dual residual {dual_residual:e}, {iterations} iterations)")]
    Solver {
        status: Status,
        primal_residual: f64,
        dual_residual: f64,
        iterations: usize,
    },
    #[error("solution violates {constraint} at frame {frame} by {amount:e}")]
    Infeasible { constraint: &'static str, frame: usize, amount: f64 },
    #[error(transparent)]
    Program(#[from] QpError),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The underlying error with stage context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
