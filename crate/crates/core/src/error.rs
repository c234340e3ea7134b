use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library. Display strings are single-line so the CLI
/// can emit them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no neighbors: kappa {kappa} selects zero of {n} points")]
    NoNeighbors { kappa: f64, n: usize },

    #[error("non-positive bandwidth at ({row}, {col})")]
    NonPositiveBandwidth { row: usize, col: usize },

    #[error("isolated node: row {row} has no off-diagonal similarity mass")]
    IsolatedNode { row: usize },

    #[error("need at least two modalities, got {found}")]
    TooFewModalities { found: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("singleton class: item {item} has no relevant co-member")]
    SingletonClass { item: usize },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("bad magic: expected \"SSMF\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("truncated: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
