//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TsmsError {
    #[error("series too short: {len} observations, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("series contains a non-finite value at position {index}")]
    NonFiniteData { index: usize },

    #[error("degenerate series: standard deviation is zero")]
    DegenerateSeries,

    #[error("region too short: {len} observations, need at least {min}")]
    RegionTooShort { len: usize, min: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("unsupported horizon {horizon}: model fitting requires H = 1")]
    UnsupportedHorizon { horizon: usize },

    #[error("dimension mismatch: got {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },

    #[error("loss value function requires a target")]
    MissingTarget,

    #[error("background set is empty")]
    EmptyBackground,

    #[error("too many features for exact enumeration: {got} > {max}")]
    TooManyFeatures { got: usize, max: usize },

    #[error("region-of-competence pool mismatch: {0}")]
    PoolMismatch(String),

    #[error("no models available for selection")]
    NoModelsAvailable,

    #[error("drift reference too short: {len} observations, need at least 2")]
    ReferenceTooShort { len: usize },

    #[error("degenerate data range: reference min equals max and no range hint given")]
    DegenerateRange,

    #[error("non-finite observation fed to drift detector")]
    NonFiniteObservation,

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("incomplete table: {0}")]
    IncompleteTable(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("empty sequence passed to DTW")]
    EmptySequence,
}

pub type Result<T> = std::result::Result<T, TsmsError>;
