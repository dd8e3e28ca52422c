use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("non-numeric cell {cell:?} at row {row}, column {column} (line {line})")]
    NonNumeric {
        cell: String,
        row: usize,
        column: usize,
        line: u64,
    },

    #[error("ragged rows: row {row} has {got} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("no loss enabled: at least one of the distance loss and the auxiliary loss is required")]
    NoLossEnabled,

    #[error("representation dimension {m} must equal projection dimension {k} when the novelty loss is used")]
    NoveltyDimMismatch { m: usize, k: usize },

    #[error("decoder absent: the model was built without the reconstruction loss")]
    DecoderAbsent,

    #[error("training diverged at epoch {epoch}: non-finite {what}")]
    Divergence { epoch: usize, what: &'static str },

    #[error("filtering round {round} would leave {remaining} rows, fewer than the required {required}")]
    FilterExhausted {
        round: usize,
        remaining: usize,
        required: usize,
    },

    #[error("wrong map kind: expected {expected}, got {got}")]
    WrongMapKind {
        expected: &'static str,
        got: &'static str,
    },

    #[error("labels must contain both classes")]
    SingleClass,

    #[error("bad magic bytes: not a {0} file")]
    BadMagic(&'static str),

    #[error("unsupported format version {found_major}.{found_minor} (this build reads {supported}.x)")]
    UnsupportedVersion {
        found_major: u16,
        found_minor: u16,
        supported: u16,
    },

    #[error("truncated file")]
    Truncated,

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("malformed record: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors that indicate a numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFinite { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::NonNumeric { .. }
                | Error::Ragged { .. }
                | Error::BadMagic(_)
                | Error::UnsupportedVersion { .. }
                | Error::Truncated
                | Error::ChecksumMismatch { .. }
                | Error::Malformed(_)
        )
    }
}
