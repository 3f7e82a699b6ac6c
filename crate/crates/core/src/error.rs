use std::path::PathBuf;

use thiserror::Error;

use crate::forward::ForwardSolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("forward solve at k = {k} did not converge: residual {} after {} iterations", report.residual, report.iterations)]
    ForwardSolver { k: f64, report: ForwardSolveReport },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("container {path}: {msg}")]
    Container { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input or unusable files rather than a
    /// numerical breakdown.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Container { .. } | Error::Json(_) | Error::Io(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
