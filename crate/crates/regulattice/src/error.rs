//! Error type shared by every layer of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix construction or lookup with inconsistent dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A parameter is outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite entry encountered where a real number is required.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// Density or potential requested on an empty index set.
    #[error("empty block: {0}")]
    EmptyBlock(String),

    /// Normalization of an all-zero matrix is undefined.
    #[error("cannot normalize a matrix with zero total mass")]
    ZeroMass,

    /// A subset refers to an index outside the host matrix.
    #[error("index {index} out of bounds for axis of length {len}")]
    IndexOutOfBounds { index: usize, len: usize },

    /// Partition classes overlap, are empty, or escape the ground set.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Exhaustive regularity check refused: the block exceeds the oracle limit.
    #[error("exact check refused: block is {rows}x{cols}, oracle limit is {limit}")]
    OracleRefused {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    /// A witness could not be shrunk into the size window needed for a split.
    #[error("witness shrink failed: {0}")]
    ShrinkFailure(String),

    /// Refinement step refused because its preconditions do not hold.
    #[error("refinement step refused: {0}")]
    StepRefused(String),

    /// Input too small to start a run at the requested parameters.
    #[error("input too small: {0}")]
    TooSmall(String),

    /// A guaranteed inequality failed at runtime; aborts the iteration.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Any failure while loading one named input file.
    #[error("{path}: {source}")]
    InputFile {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Requested mode name is not registered.
    #[error("unknown mode: {0}")]
    UnknownMode(String),

    /// Command-line flags that contradict each other.
    #[error("conflicting options: {0}")]
    Conflict(String),
}
