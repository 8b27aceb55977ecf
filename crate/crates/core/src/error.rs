use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected \"PMAT\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated header: {0} of 32 bytes")]
    TruncatedHeader(usize),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("frame count {0} != 500")]
    FrameCount(usize),

    #[error("grid geometry {rows}x{cols} != 32x32")]
    Geometry { rows: usize, cols: usize },

    #[error("reserved header bytes are not zero")]
    ReservedBytes,

    #[error("unexpected bytes after payload")]
    TrailingBytes,

    #[error("invalid label {0:?} (expected FM+ or FM-)")]
    InvalidLabel(String),

    #[error("invalid session {0:?} (expected T1, T5, T6 or T7)")]
    InvalidSession(String),

    #[error("duplicate snippet id {0:?}")]
    DuplicateId(String),

    #[error("snippet {id}: manifest label {manifest} disagrees with file label {file}")]
    LabelMismatch { id: String, manifest: String, file: String },

    #[error("manifest count mismatch: {0}")]
    CountMismatch(String),

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("invalid synthetic spec: {0}")]
    SynthSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown architecture {0:?}")]
    UnknownArchitecture(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
