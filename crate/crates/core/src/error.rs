use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    UndefinedMetric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate record for video {video_id:?} segment {segment_index}")]
    DuplicateSegment { video_id: String, segment_index: usize },

    #[error("video {video_id:?}: {message}")]
    NonContiguousSpans { video_id: String, message: String },

    #[error("invalid segment response for video {video_id:?}: {message}")]
    InvalidSegment { video_id: String, message: String },

    #[error("bad magic: expected \"CRVB\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported embeddings version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated embeddings payload: {0}")]
    Truncated(String),

    #[error("embeddings section {section}: expected {expected} rows, found {found}")]
    RowCountMismatch {
        section: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("embeddings section {section} row {row} has zero norm")]
    ZeroNormRow { section: &'static str, row: usize },

    #[error("embeddings section {section} row {row} has a non-finite entry")]
    NonFiniteRow { section: &'static str, row: usize },

    #[error("embeddings: {0}")]
    BadSection(String),

    #[error("ground truth for video {video_id:?}: {message}")]
    InvalidRange { video_id: String, message: String },

    #[error("unknown ground-truth format {0:?}")]
    UnknownFormat(String),

    #[error("no frame count known for video {0:?}")]
    MissingFrameCount(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("validation failed for video {video_id:?}: {summary}")]
    ValidationFailed { video_id: String, summary: String },

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::UndefinedMetric(_) => ErrorKind::UndefinedMetric,
            _ => ErrorKind::Validation,
        }
    }
}
