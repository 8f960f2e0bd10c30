use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the core library.
///
/// Variants map onto the error classes the command line reports with
/// distinct exit codes (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("annotation log inconsistent: {0}")]
    LogConsistency(String),

    #[error("{} marker(s) fall outside the recording: {}", .0.len(), format_rejections(.0))]
    EpochBounds(Vec<RejectedMarker>),
}

/// A marker refused by epoch extraction, with the offending sample range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedMarker {
    pub index: usize,
    pub image_id: String,
    pub onset_sample: usize,
}

fn format_rejections(list: &[RejectedMarker]) -> String {
    list.iter()
        .map(|r| format!("#{} {}@{}", r.index, r.image_id, r.onset_sample))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Format,
    Data,
    Precondition,
    Numeric,
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

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Format { .. } => ErrorClass::Format,
            Error::Data(_) | Error::LogConsistency(_) => ErrorClass::Data,
            Error::Precondition(_) | Error::EpochBounds(_) | Error::UndefinedMetric(_) => {
                ErrorClass::Precondition
            }
            Error::Numeric(_) | Error::Training(_) => ErrorClass::Numeric,
        }
    }
}
