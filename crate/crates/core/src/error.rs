use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("malformed trial file {path}: {reason}")]
    TrialFile { path: PathBuf, reason: String },

    #[error("unknown class label {0:?}")]
    UnknownLabel(String),

    #[error("empty session")]
    EmptySession,

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error("output directory {0} already exists")]
    AlreadyExists(PathBuf),

    #[error("invalid filter parameters: {0}")]
    InvalidFilter(String),

    #[error("signal too short: {len} samples, need more than {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("window ({start} s, {end} s) out of bounds for {len} samples at {fs} Hz")]
    WindowOutOfBounds {
        start: f64,
        end: f64,
        len: usize,
        fs: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("composite covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("model file version {found} is not supported (expected {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
