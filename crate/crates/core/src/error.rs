use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the pipeline.
///
/// Everything except `Io` and `Json` is a data or configuration problem
/// that the caller can fix by changing its inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("unknown problem {0:?}")]
    UnknownProblem(String),

    #[error("unknown class {class:?} for problem {problem:?}")]
    UnknownClass { problem: String, class: String },

    #[error("document {id:?} has no label for problem {problem:?}")]
    MissingLabel { id: String, problem: String },

    #[error("problem {problem:?} needs at least 2 classes, found {found}")]
    TooFewClasses { problem: String, found: usize },

    #[error("class {class:?} has {size} members, fewer than the {k} folds requested")]
    ClassTooSmall { class: String, size: usize, k: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("problem {0:?} has no positive score")]
    AllZeroProblem(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
