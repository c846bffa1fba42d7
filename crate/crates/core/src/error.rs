use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report. Each variant carries a stable
/// `E_*` code (see [`Error::code`]) that ends up in reports and CLI output.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("cannot read frame image {path}: {msg}")]
    Image { path: PathBuf, msg: String },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("no window of {window} consecutive frames reaches openness {threshold}")]
    NoOpenMouth { window: usize, threshold: f64 },
    #[error("clip has {frames} frames, need at least {needed}")]
    TooShort { frames: usize, needed: usize },
    #[error("only {found} of {needed} global frames admissible")]
    InsufficientGlobal { found: usize, needed: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("both classes required, found only {0}")]
    SingleClass(&'static str),
    #[error("no input values")]
    Empty,
    #[error("no positive examples")]
    NoPositives,
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "E_PARSE",
            Error::Schema(_) => "E_SCHEMA",
            Error::Image { .. } => "E_IMAGE",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::NoOpenMouth { .. } => "E_NO_OPEN_MOUTH",
            Error::TooShort { .. } => "E_TOO_SHORT",
            Error::InsufficientGlobal { .. } => "E_INSUFFICIENT_GLOBAL",
            Error::Shape(_) => "E_SHAPE",
            Error::NotScalar(_) => "E_NOT_SCALAR",
            Error::EmptyBatch => "E_EMPTY_BATCH",
            Error::EmptyDataset => "E_EMPTY_DATASET",
            Error::SingleClass(_) => "E_SINGLE_CLASS",
            Error::Empty => "E_EMPTY",
            Error::NoPositives => "E_NO_POSITIVES",
            Error::Version { .. } => "E_VERSION",
            Error::Corrupt(_) => "E_CORRUPT",
            Error::Config(_) => "E_CONFIG",
            Error::Io { .. } => "E_IO",
        }
    }

    /// True for failures caused by the input data rather than the program.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NotScalar(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
