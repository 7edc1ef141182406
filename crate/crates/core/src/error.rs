use std::io;
use std::path::PathBuf;

/// A located error in one of the line-oriented text formats.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    /// 1-based character column.
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Decoding failures for `.sftp` tensors and 8-bit label PNGs.
///
/// Every variant names where in the input the problem was found: a byte
/// offset for framing problems, a pixel coordinate for bad values.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic at offset 0: expected \"SFTP1\\n\"")]
    BadMagic,
    #[error("truncated header: expected {expected} bytes, got {actual}")]
    TruncatedHeader { expected: usize, actual: usize },
    #[error("truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing data at offset {offset}: expected {expected} payload bytes, got {actual}")]
    TrailingBytes {
        offset: usize,
        expected: usize,
        actual: usize,
    },
    #[error("invalid dimensions at offset 6: {height}x{width}x{channels}")]
    BadDimensions {
        height: u32,
        width: u32,
        channels: u32,
    },
    #[error("unknown flag bits {flags:#04x} at offset 18")]
    BadFlags { flags: u8 },
    #[error("invalid scale {scale} at offset 19")]
    BadScale { scale: f32 },
    #[error("non-finite score at ({row},{col}) channel {channel}")]
    NonFinite {
        row: usize,
        col: usize,
        channel: usize,
    },
    #[error("score {value} outside [0,1] at ({row},{col}) channel {channel}")]
    OutOfRange {
        row: usize,
        col: usize,
        channel: usize,
        value: f32,
    },
    #[error("zero-sum pixel at ({row},{col}) cannot be renormalized")]
    ZeroSum { row: usize, col: usize },
    #[error("pixel ({row},{col}) sums to {sum}, drift beyond renormalization limit")]
    ExcessDrift { row: usize, col: usize, sum: f64 },
    #[error("invalid id {id} at ({row},{col})")]
    InvalidLabel { id: u8, row: usize, col: usize },
    #[error("unsupported PNG layout: {0}")]
    UnsupportedPng(String),
    #[error("PNG decoding failed: {0}")]
    Png(String),
    #[error("invalid sidecar: {0}")]
    Sidecar(String),
    #[error("geometry at offset 6: {0}")]
    Geometry(String),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    ParseFile {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{}: {source}", path.display())]
    FormatFile {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("ontology has validation errors: {0}")]
    Validation(String),
    #[error("empty allowed set at pixel ({row},{col}) with ground truth {label} under fallback=error")]
    Fallback { row: usize, col: usize, label: u8 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a file path to a parse or format error.
    pub(crate) fn at_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse(source) => Error::ParseFile {
                path: path.into(),
                source,
            },
            Error::Format(source) => Error::FormatFile {
                path: path.into(),
                source,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
