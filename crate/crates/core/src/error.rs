use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid shape {0:?}: extents must be positive and match the data length")]
    InvalidShape(Vec<usize>),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer chain broken at layer {index}: expected input width {expected}, found {found}")]
    BrokenChain {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("batch normalization in train mode needs at least two samples per batch")]
    BatchTooSmall,

    #[error("activation cache does not belong to this model state")]
    StaleActivations,

    #[error("negative magnitude {0} passed to the shot-noise model")]
    NegativeMagnitude(f64),

    #[error("noiseless measurement: noise standard deviation is zero")]
    Noiseless,

    #[error("bad IDX magic 0x{found:08x} (expected 0x{expected:08x}) in {path}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch in {path}: {detail}")]
    DimensionMismatch { path: PathBuf, detail: String },

    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("missing weights: {0}")]
    MissingWeights(String),

    #[error("dataset missing: {0}")]
    DatasetMissing(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable short identifier, used for machine-readable error lines and C error codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidShape(_) => "invalid_shape",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::BrokenChain { .. } => "broken_chain",
            Error::BatchTooSmall => "batch_too_small",
            Error::StaleActivations => "stale_activations",
            Error::NegativeMagnitude(_) => "negative_magnitude",
            Error::Noiseless => "noiseless",
            Error::BadMagic { .. } => "bad_magic",
            Error::TruncatedPayload { .. } => "truncated_payload",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ChecksumMismatch(_) => "checksum_mismatch",
            Error::Format(_) => "format",
            Error::Config(_) => "invalid_config",
            Error::Provenance(_) => "provenance_mismatch",
            Error::MissingWeights(_) => "missing_weights",
            Error::DatasetMissing(_) => "dataset_missing",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn shape_mismatch(expected: &[usize], actual: &[usize]) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_vec(),
        actual: actual.to_vec(),
    }
}
