use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MknnError> = std::result::Result<T, E>;

/// Errors raised by dataset handling, graph construction, the TRW solvers and
/// the classifiers.
#[derive(Debug, Error)]
pub enum MknnError {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no labeled samples")]
    NoLabeledSamples,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("class {class} has {available} samples, {requested} requested")]
    InsufficientClassSamples {
        class: u32,
        available: usize,
        requested: usize,
    },
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("unknown synthetic dataset kind `{0}`")]
    UnknownKind(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k = {k} exceeds the number of labeled samples ({labeled})")]
    KExceedsLabeled { k: usize, labeled: usize },
    #[error("sample {0} is labeled; only unlabeled samples can be classified")]
    AlreadyLabeled(usize),
    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("vertex {0} is isolated (zero degree)")]
    IsolatedVertex(usize),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("Cholesky factorization failed: matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("linear system is numerically singular")]
    Singular,
    #[error("solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("dense problem with n = {n} needs ~{bytes} bytes, over the {limit} byte limit")]
    TooLarge { n: usize, bytes: u64, limit: u64 },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("invalid model file: {0}")]
    Format(String),
}

impl MknnError {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        MknnError::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MknnError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical routines, as opposed to bad input
    /// data or parameters.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MknnError::IsolatedVertex(_)
                | MknnError::NonFinite(_)
                | MknnError::NotSymmetric { .. }
                | MknnError::NotPositiveDefinite
                | MknnError::Singular
                | MknnError::ResidualTooLarge { .. }
        )
    }
}
