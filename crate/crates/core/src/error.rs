use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("column `{column}` must be binary, found {value} at row {row}")]
    NonBinaryColumn {
        column: &'static str,
        row: usize,
        value: f64,
    },
    #[error("non-finite covariate at row {row}, column {col}")]
    NonFiniteCovariate { row: usize, col: usize },
    #[error("non-finite outcome at row {row}")]
    NonFiniteOutcome { row: usize },
    #[error("treatment arm {arm} has no observations{context}")]
    EmptyArm { arm: u8, context: String },
    #[error("cell (d={d}, m={m}) has no observations")]
    EmptyCell { d: u8, m: u8 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{n} observations cannot be split into {k} folds")]
    TooFewObservations { n: usize, k: usize },
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("binary response has a single class")]
    OneClassOnly,
    #[error("training subsamples for the nested mean overlap")]
    DisjointnessViolated,
    #[error("no observations retained after trimming")]
    EmptyRetainedSet,
    #[error("standard error is zero or non-finite")]
    ZeroSe,
    #[error("counterfactual estimates were computed on different folds or samples")]
    InconsistentFolds,
    #[error("non-finite score value for observation {row}")]
    NumericalOverflow { row: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fold {fold} failed: {source}")]
    FoldFailure {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}
