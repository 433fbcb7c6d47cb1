use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("zero-sized dimension: {0}")]
    ZeroDim(&'static str),
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("feature vector has norm {norm:e}, below the floor; cosine is undefined")]
    ZeroVector { norm: f64 },
    #[error("numeric overflow in direct-domain Sinkhorn (epsilon {epsilon}); use log-domain")]
    NumericOverflow { epsilon: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("AU-ROC needs both classes, got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("no defect regions to evaluate")]
    NoRegions,
    #[error("no anomaly-free pixels to compute a false positive rate")]
    NoNegativePixels,
    #[error("no provenance for prototype {0}")]
    MissingProvenance(usize),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (this build reads {supported})")]
    BadVersion { found: u16, supported: u16 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("non-finite float in file at element {index}")]
    NonFiniteFloat { index: usize },
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
