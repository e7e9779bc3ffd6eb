use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("data row {row}: missing value in column `{column}`")]
    MissingCell { row: usize, column: String },
    #[error("data row {row}: column `{column}` expects a number, got `{token}`")]
    NotNumeric {
        row: usize,
        column: String,
        token: String,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("feature `{feature}` has unseen level `{level}`")]
    UnseenLevel { feature: String, level: String },
    #[error("feature `{feature}` has non-finite value {value}")]
    NonFinite { feature: String, value: f64 },
    #[error("missing value for feature `{0}`")]
    MissingFeature(String),
    #[error("design has {rows} rows but {columns} columns; need at least as many rows as columns")]
    TooFewRows { rows: usize, columns: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coalition size {size} out of range for {features} features")]
    CoalitionSize { features: usize, size: usize },
    #[error("{features} features exceeds the exhaustive cap of {cap}; sample coalitions instead")]
    TooManyFeatures { features: usize, cap: usize },
    #[error("Gram matrix is degenerate (max diagonal {0})")]
    DegenerateGram(f64),
    #[error(
        "coalition mask {mask:#b}: constrained block is not positive definite at pivot {pivot}; \
         check the design for rank deficiency"
    )]
    NotPositiveDefinite { mask: u64, pivot: usize },
    #[error("coalition mask {mask:#b}: retained Gram submatrix is singular at pivot {pivot}")]
    SingularSubmatrix { mask: u64, pivot: usize },
    #[error("Kernel SHAP normal matrix is singular at pivot {0}; the coalition plan is deficient, draw more coalitions")]
    SingularShapleySystem(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_row(self, row: usize) -> Self {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }
}
