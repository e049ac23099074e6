use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm below 1e-12 cannot be normalized")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("non-finite input value")]
    NonFiniteInput,

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("prototype set is empty")]
    EmptyPrototypeSet,

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("class id {class_id} out of range for {num_classes} classes")]
    InvalidClassId { class_id: usize, num_classes: usize },

    #[error("class {0} has no support features")]
    MissingClass(usize),

    #[error("class cache {0} is empty")]
    EmptyCache(usize),

    #[error("prototype bank is not initialized")]
    UninitializedBank,

    #[error("sample stream is empty")]
    EmptyStream,

    #[error("reward mask selects no component")]
    EmptyMask,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("bank has no labels")]
    MissingLabels,

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("vector norm {norm} outside tolerated range ({context})")]
    NormViolation { norm: f64, context: String },

    #[error("invalid bank: {0}")]
    InvalidBank(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

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

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
