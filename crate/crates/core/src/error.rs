use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected record: {field}: {reason}")]
    RejectedRecord { field: &'static str, reason: String },

    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected {expected} features, found {found}")]
    FeatureLength {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(
        "sampler starved after {proposed} proposals ({accepted} accepted, acceptance rate {rate:.3e})"
    )]
    SamplerStarvation {
        proposed: u64,
        accepted: u64,
        rate: f64,
    },

    #[error("training diverged at step {step} (lr {lr:e}): {what} is not finite")]
    Divergence {
        step: usize,
        lr: f64,
        what: &'static str,
    },

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("model file version {found} is newer than supported version {supported}")]
    ModelVersion { found: u64, supported: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
