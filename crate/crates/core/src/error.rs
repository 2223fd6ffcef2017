use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file-format header: expected an `FN` line before any record")]
    MissingHeader,

    #[error("record starting at line {start_line} has no end-of-record tag (input ended or `EF` found at line {line})")]
    TruncatedRecord { start_line: usize, line: usize },

    #[error("duplicate record id `{id}` at line {line}")]
    DuplicateRecord { id: String, line: usize },

    #[error("invalid argument `{field}`: {message}")]
    InvalidArgument { field: String, message: String },

    #[error("inconsistent workspace operation: {0}")]
    Consistency(String),

    #[error("operation refused: {0}")]
    Refused(String),

    #[error("cannot export graph: {0}")]
    EmptyGraph(String),

    #[error("unsupported workspace file version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("workspace file failed integrity check: {0}")]
    Integrity(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
