//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by every module in this crate.
///
/// Variants are grouped by origin: parameter validation, sample validation,
/// enumeration guards, dataset ingestion, and harness configuration.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability-like parameter fell outside its legal range.
    #[error("{name} must lie in {range}, got {value}")]
    ProbabilityRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    /// An order-statistic index fell outside `0..=max`.
    #[error("index {name}={value} out of range 0..={max}")]
    IndexRange {
        name: &'static str,
        value: usize,
        max: usize,
    },

    /// A sample was empty where at least one observation is required.
    #[error("group '{label}' is empty")]
    EmptyGroup { label: String },

    /// A sample contained NaN or an infinity.
    #[error("group '{label}' contains a non-finite value")]
    NonFinite { label: String },

    /// A sample handed to a sorted-input constructor was not nondecreasing.
    #[error("group '{label}' is not sorted in nondecreasing order")]
    Unsorted { label: String },

    /// Fewer groups than the operation needs.
    #[error("need at least {needed} groups, got {got}")]
    TooFewGroups { needed: usize, got: usize },

    /// More groups than the factorial guard allows.
    #[error(
        "{got} groups would require {got}! permutations; refusing beyond {max} \
         (raise the guard explicitly to override)"
    )]
    TooManyGroups { max: usize, got: usize },

    /// The exhaustive witness enumeration would exceed its tuple cap.
    #[error("witness enumeration bound {bound:.3e} exceeds cap {cap:.1e}")]
    EnumerationTooLarge { bound: f64, cap: f64 },

    /// A witness handed in for re-evaluation has the wrong shape.
    #[error("malformed witness: {reason}")]
    MalformedWitness { reason: String },

    /// A p-value outside `[0, 1]` was handed to a correction procedure.
    #[error("p-value {value} outside [0, 1]")]
    PValueRange { value: f64 },

    /// The requested statistical method cannot serve this input.
    #[error("{reason}")]
    UnsupportedMethod { reason: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed delimited input (ragged rows are reported here by the reader).
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A cell failed to parse as a number.
    #[error("line {line}, column {column}: cannot parse '{token}' as a number")]
    MalformedCell {
        line: u64,
        column: usize,
        token: String,
    },

    /// The header or a row did not match the declared layout.
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    /// Two rows or columns declared the same feature identifier.
    #[error("duplicate feature id '{id}'")]
    DuplicateFeatureId { id: String },

    /// The matrix does not contain at least two distinct group labels.
    #[error("matrix needs at least 2 distinct group labels, got {got}")]
    TooFewDistinctGroups { got: usize },

    /// A feature id was requested that the matrix does not contain.
    #[error("unknown feature '{id}'")]
    UnknownFeature { id: String },

    /// A feature cannot be scored; callers may record this and move on.
    #[error("feature '{id}' skipped: {reason}")]
    FeatureSkipped { id: String, reason: String },

    /// Cross-validation configuration is unusable for this matrix.
    #[error("invalid cross-validation configuration: {message}")]
    InvalidConfig { message: String },

    /// An internal numeric invariant was violated.
    #[error("internal numeric error: {message}")]
    Numeric { message: String },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
