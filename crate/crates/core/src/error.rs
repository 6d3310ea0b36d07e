use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of failures, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or configuration.
    Usage,
    /// Unreadable, malformed or unsuitable input data.
    Data,
    /// Degenerate statistics or numerical breakdown.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed audio file: {0}")]
    Format(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("clip has {len} samples, shorter than one frame of {frame}")]
    TooShort { len: usize, frame: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate class: {0}")]
    DegenerateClass(String),

    #[error("coefficient {coefficient} has zero within-class variance in every class")]
    ConcentratedFeature { coefficient: usize },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Precondition(_) | Error::Domain(_) => ErrorKind::Usage,
            Error::Io { .. }
            | Error::Format(_)
            | Error::UnsupportedFormat(_)
            | Error::EmptyInput(_)
            | Error::TooShort { .. }
            | Error::Dimension { .. }
            | Error::Serde(_) => ErrorKind::Data,
            Error::DegenerateClass(_)
            | Error::ConcentratedFeature { .. }
            | Error::DegenerateData(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
