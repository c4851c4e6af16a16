use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GrdaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GrdaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("posterior undefined: {0}")]
    UndefinedPosterior(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GrdaError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        GrdaError::Dimension(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        GrdaError::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GrdaError::Io {
            path: path.into(),
            source,
        }
    }
}
