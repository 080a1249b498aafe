use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("duplicate article id {0:?}")]
    DuplicateId(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// A line-oriented input (store, manifest, review sheet) could not be read.
    /// `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("TMX parse error{}: {message}", unit.map(|u| format!(" in unit {u}")).unwrap_or_default())]
    TmxParse { unit: Option<usize>, message: String },

    #[error("unsupported TMX version {0:?}")]
    UnsupportedVersion(String),

    #[error("document has no textual content")]
    EmptyDocument,

    #[error("insufficient training data: need at least {needed} characters, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid bead kind {0:?}")]
    InvalidBead(String),

    #[error("documents have incompatible structure")]
    IncompatibleStructure,

    #[error("pivot mismatch: {0}")]
    PivotMismatch(String),

    #[error("split ratios must be positive and sum to 1")]
    InvalidRatios,

    #[error("input mismatch: {0}")]
    InputMismatch(String),

    #[error("review incomplete; missing verdicts for {} item(s)", .0.len())]
    IncompleteReview(Vec<String>),

    #[error("no metadata for article {0:?}")]
    MissingMetadata(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::MissingFile(_))
    }
}
