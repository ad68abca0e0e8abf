use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped into three broad kinds (see [`ErrorKind`]) so that
/// front ends can map them to exit codes without matching every case.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty sequence")]
    EmptySequence,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sequence too short: {frames} frame(s), need at least 2")]
    TooShort { frames: usize },

    #[error("spectral radius of the raw recurrent matrix is 0; raise `density` or `n_units`")]
    DegenerateReservoir,

    #[error("class `{0}` has no training samples")]
    MissingClass(String),

    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("factorization failed: normal-equation matrix is not positive definite")]
    Factorization,

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("unsupported format version in {path}: found {found}, expected {expected}")]
    Version {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("feature dimension mismatch for `{entry}`: manifest says {expected}, file has {actual}")]
    EntryDimension {
        entry: String,
        expected: usize,
        actual: usize,
    },

    #[error("unknown split tag `{tag}` for `{entry}`")]
    UnknownSplit { entry: String, tag: String },

    #[error("duplicate {what} `{value}` in manifest")]
    Duplicate { what: &'static str, value: String },

    #[error("class `{0}` absent from train")]
    ClassAbsentFromTrain(String),

    #[error("empty split `{0}`")]
    EmptySplit(&'static str),

    #[error("model/pipeline width mismatch: model expects {model}, pipeline produces {pipeline}")]
    ModelWidth { model: usize, pipeline: usize },

    #[error("sample `{id}`: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, files or configuration.
    Validation,
    /// The numerics broke down (non-PD system, degenerate reservoir).
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Factorization | Error::DegenerateReservoir => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            Error::Sample { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
