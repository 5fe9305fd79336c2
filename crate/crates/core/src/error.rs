use std::path::PathBuf;

use thiserror::Error;

use crate::harness::RunRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("singular matrix in {op}: pivot magnitude {pivot:e}")]
    Singular { op: &'static str, pivot: f64 },

    #[error("{op} did not converge within {iterations} iterations")]
    Convergence { op: &'static str, iterations: usize },

    #[error("degenerate input to {op}: {detail}")]
    Degenerate { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("optimizer state does not match configuration: {0}")]
    State(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("run diverged at step {step} (loss {loss})")]
    Divergence {
        step: usize,
        loss: f64,
        record: Box<RunRecord>,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
