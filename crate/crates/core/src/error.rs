//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("solver diverged after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("training of {network} diverged at epoch {epoch}")]
    TrainingDiverged { network: String, epoch: usize },

    #[error("numerical blow-up at iteration {iteration}: latent vector became non-finite")]
    NumericalBlowup { iteration: usize },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// True for errors that stem from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::TrainingDiverged { .. }
                | Error::NumericalBlowup { .. }
                | Error::NonFinite(_)
        )
    }
}
