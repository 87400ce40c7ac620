use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
///
/// Every variant is classified as either a validation error (bad config,
/// bad data, mismatched artifacts) or a runtime error (I/O, numerical
/// failure); [`Error::exit_code`] maps the classes to the CLI exit codes
/// 1 and 2 respectively.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing column `{column}` in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: header mismatch: expected {expected}, got {got}")]
    HeaderMismatch {
        path: PathBuf,
        expected: String,
        got: String,
    },

    #[error("{path}: row {row}: {msg}")]
    BadRow {
        path: PathBuf,
        row: usize,
        msg: String,
    },

    #[error(
        "{kind} event {event_id} references unknown visit `{visit_id}` of patient `{patient_id}`"
    )]
    UnknownVisit {
        kind: &'static str,
        event_id: String,
        patient_id: String,
        visit_id: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),

    #[error("{0}")]
    Empty(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} fingerprint mismatch: expected {expected}, got {got}")]
    Fingerprint {
        what: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("metric undefined: {0}")]
    Metric(String),
}

impl Error {
    /// CLI exit code: 1 for validation errors, 2 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingColumn { .. }
            | Error::HeaderMismatch { .. }
            | Error::BadRow { .. }
            | Error::UnknownVisit { .. }
            | Error::Config(_)
            | Error::Invalid(_)
            | Error::Empty(_)
            | Error::Fingerprint { .. }
            | Error::Metric(_) => 1,
            Error::Io { .. }
            | Error::Shape { .. }
            | Error::NonFiniteGradient { .. }
            | Error::Diverged { .. }
            | Error::Checkpoint(_) => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
