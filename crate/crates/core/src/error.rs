use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample-rate mismatch: acoustic {acoustic} Hz vs acceleration {acceleration} Hz")]
    SampleRateMismatch { acoustic: f64, acceleration: f64 },

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("signal too short: length {len}, need at least {required}")]
    TooShort { len: usize, required: usize },

    #[error("signal length {len} exceeds padding target {target}")]
    LengthExceedsTarget { len: usize, target: usize },

    #[error("depth mismatch: expected {expected}, found {found}")]
    DepthMismatch { expected: usize, found: usize },

    #[error("empty valid region")]
    EmptyValidRegion,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("classification needs at least two classes")]
    SingleClass,

    #[error("{groups} groups cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },

    #[error("non-finite gradient for {parameter}")]
    NonFiniteGradient { parameter: String },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures raised by the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
