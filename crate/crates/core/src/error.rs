use std::path::PathBuf;

use crate::dataset::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid attribute schema: {0}")]
    InvalidSchema(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(ValidationReport),

    #[error("dataset has no confidences")]
    MissingConfidences,

    #[error("attribute index {index} out of range for {count} attributes")]
    AttributeOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{0} class is empty")]
    EmptyClass(&'static str),

    #[error("class centroids coincide (difference norm {0:e})")]
    ZeroDifference(f64),

    #[error("SVM weight vector vanished (norm {0:e})")]
    ZeroWeight(f64),

    #[error("target direction lies in the span of the others (residual norm {0:e})")]
    DegenerateProjection(f64),

    #[error("requested {requested} rows from a dataset of {available}")]
    SampleSize { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gram matrix is not positive semi-definite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("no latent codes to evaluate")]
    EmptyLatents,

    #[error("zero-norm vector at position {0}")]
    ZeroNorm(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("{path}: truncated payload, expected {expected} bytes but found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
