use thiserror::Error;

/// Errors raised across ingestion, modelling, solving and the pipeline.
#[derive(Debug, Error)]
pub enum FairError {
    #[error("column `{0}` is not binary (expected only 0/1 values)")]
    NonBinarySensitive(String),
    #[error("label column `{column}` has {distinct} distinct values, expected exactly 2")]
    LabelNotBinary { column: String, distinct: usize },
    #[error("label value {value} does not match the declared coding")]
    LabelCoding { value: f64 },
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("column `{0}` is not numeric")]
    NonNumericColumn(String),
    #[error("unknown sensitive feature `{0}`")]
    UnknownSensitive(String),
    #[error("group `{0}` has no rows")]
    EmptyGroup(String),
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("dataset has no group ids")]
    MissingGroups,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("feature width mismatch: expected {expected} columns, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("subset {0} is empty")]
    EmptySubset(&'static str),
    #[error("fairness metric is undefined for every cut-off: {0}")]
    UndefinedMetric(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("objective is not finite at the initial point")]
    NonFiniteStart,
    #[error("in-processing fit failed: {0}")]
    Fit(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FairError> = std::result::Result<T, E>;
