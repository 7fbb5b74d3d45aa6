use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("zero data rows")]
    EmptyData,
    #[error("feature `{0}` has no non-missing values")]
    FeatureAllMissing(String),
    #[error("case `{0}` has no label")]
    Unlabeled(String),
    #[error("data contains a single class")]
    SingleClass,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("k = {k} exceeds the {available} available reference cases")]
    KTooLarge { k: usize, available: usize },
    #[error("fold {fold} lacks one of the classes required by metric `{metric}`")]
    SingleClassFold { fold: usize, metric: String },
    #[error("exact Shapley values are limited to {limit} features ({features} given); use Monte Carlo mode")]
    TooManyFeatures { features: usize, limit: usize },
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    /// True for failures caused by user-supplied data or files, as opposed to
    /// invalid parameters or internal faults.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::MissingColumn(_)
                | Error::BadCell { .. }
                | Error::EmptyData
                | Error::FeatureAllMissing(_)
                | Error::Unlabeled(_)
                | Error::SingleClass
                | Error::SchemaMismatch(_)
                | Error::UnknownCase(_)
                | Error::UnknownFeature(_)
                | Error::ModelFormat(_)
                | Error::SingleClassFold { .. }
        )
    }
}
