use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse failure at row {row}, column {col}: {reason}")]
    Parse { row: usize, col: usize, reason: String },

    #[error("missing value at row {row}, column {col}")]
    Missing { row: usize, col: usize },

    #[error("ragged input: row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cdf evaluator returned {value} for column {col}, outside [0, 1]")]
    CdfRange { col: usize, value: f64 },

    #[error("work budget exceeded: {requested} > {budget} rank draws")]
    BudgetExceeded { requested: u128, budget: u128 },

    #[error("null table missing for n={n}, t={t}")]
    TableMissing { n: usize, t: usize },

    #[error("null table shape mismatch: table is n={table_n}, t={table_t}; data is n={n}, t={t}")]
    TableShape {
        table_n: usize,
        table_t: usize,
        n: usize,
        t: usize,
    },

    #[error("null table version mismatch: expected {expected}, found {found}")]
    TableVersion { expected: String, found: String },

    #[error("null table checksum validation failed: {0}")]
    Checksum(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("oracle boundary is zero at beta={beta}, sigma={sigma}")]
    ZeroBoundary { beta: f64, sigma: f64 },

    #[error("unknown {kind}: {value}")]
    Unknown { kind: &'static str, value: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable kebab-case tag of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::Missing { .. } => "missing-value",
            Self::Ragged { .. } => "ragged",
            Self::NonFinite { .. } => "non-finite",
            Self::Shape(_) => "shape",
            Self::LengthMismatch { .. } => "length-mismatch",
            Self::InvalidParameter(_) => "invalid-parameter",
            Self::CdfRange { .. } => "cdf-range",
            Self::BudgetExceeded { .. } => "budget-exceeded",
            Self::TableMissing { .. } => "table-missing",
            Self::TableShape { .. } => "table-shape",
            Self::TableVersion { .. } => "table-version",
            Self::Checksum(_) => "checksum",
            Self::Quadrature(_) => "quadrature",
            Self::ZeroBoundary { .. } => "zero-boundary",
            Self::Unknown { .. } => "unknown-value",
            Self::Json(_) => "json",
        }
    }
}
