use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the recourse pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("feature `{feature}`: unknown category `{value}`")]
    UnknownCategory { feature: String, value: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, feature `{feature}`: cannot parse `{value}` as a number")]
    BadNumber { row: usize, feature: String, value: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("no confident positives; lower γ (γ = {gamma})")]
    EmptyPool { gamma: f64 },

    #[error("no negatives seeking recourse")]
    EmptyNegatives,

    #[error("every candidate is infeasible: immutable features differ ({0})")]
    AllInfeasible(String),

    #[error("checkpoint fingerprint mismatch: expected {expected}, found {found}")]
    Fingerprint { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable identifier for the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::NonScalarLoss(_) => "non_scalar_loss",
            Error::NonFinite(_) => "non_finite",
            Error::Schema(_) => "schema",
            Error::UnknownCategory { .. } => "unknown_category",
            Error::MissingColumn(_) => "missing_column",
            Error::BadNumber { .. } => "bad_number",
            Error::Invalid(_) => "invalid",
            Error::EmptyPool { .. } => "empty_pool",
            Error::EmptyNegatives => "empty_negatives",
            Error::AllInfeasible(_) => "all_infeasible",
            Error::Fingerprint { .. } => "fingerprint",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
