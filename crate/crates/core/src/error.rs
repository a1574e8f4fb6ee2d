//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by dataset handling, transport solvers, and selection.
#[derive(Debug, Error)]
pub enum Error {
    /// An input collection that must be non-empty was empty.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Matrix/vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A weight vector does not sum to 1 within tolerance.
    #[error("{which} weights sum to {sum}, expected 1")]
    NotAProbability { which: &'static str, sum: f64 },

    /// A weight or cost entry that must be nonnegative was negative.
    #[error("negative entry in {which} at ({row}, {col})")]
    NegativeEntry {
        which: &'static str,
        row: usize,
        col: usize,
    },

    /// A metric matrix that must be symmetric with zero diagonal is not.
    #[error("metric matrix {0} is not symmetric with zero diagonal")]
    NotAMetric(&'static str),

    /// A parameter is outside its valid range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// File I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV cell failed to parse; row and column are zero-based data coordinates.
    #[error("parse error at row {row}, column {column} ({name}): {message}")]
    Parse {
        row: usize,
        column: usize,
        name: String,
        message: String,
    },

    /// Rows of a CSV file have inconsistent field counts.
    #[error("ragged csv: row {row} has {got} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },

    /// Operation requires class labels but the dataset has none.
    #[error("dataset has no labels")]
    MissingLabels,

    /// Supervised operations need at least two classes.
    #[error("found {0} class(es), need at least 2")]
    TooFewClasses(usize),

    /// A class ended up with no samples.
    #[error("class {0:?} has no samples")]
    EmptyClass(String),

    /// Filtering removed every row.
    #[error("filter removed all {0} rows")]
    AllRowsRemoved(usize),

    /// A split left one side empty.
    #[error("split leaves an empty side (train {train}, test {test})")]
    DegenerateSplit { train: usize, test: usize },

    /// Feature index out of range or repeated.
    #[error("invalid feature index {index} (d = {d})")]
    InvalidFeatureIndex { index: usize, d: usize },

    /// A distance matrix is all zero where a positive entry is required.
    #[error("degenerate distance matrix: {0}")]
    DegenerateMatrix(String),

    /// Two distance matrices disagree on class names or order.
    #[error("class order mismatch between distance matrices")]
    ClassOrderMismatch,

    /// Relative change is undefined against a zero baseline entry.
    #[error("zero baseline distance for class pair ({a:?}, {b:?})")]
    ZeroBaseline { a: String, b: String },

    /// Membership precondition on a feature set was violated.
    #[error("feature {index} {problem} the feature set")]
    FeatureMembership {
        index: usize,
        problem: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
