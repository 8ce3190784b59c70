//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AuditError>;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("invalid record at row {row}: {message}")]
    InvalidRecord { row: usize, message: String },

    #[error("duplicate item id \"{id}\" (rows {first_row} and {row})")]
    DuplicateId {
        id: String,
        first_row: usize,
        row: usize,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid synthetic spec: {0}")]
    InvalidSyntheticSpec(String),

    #[error("vocabulary is empty after min_df filtering")]
    EmptyVocabulary,

    #[error("embedding file {path}: {message}")]
    Embedding { path: String, message: String },

    #[error("k-means: {0}")]
    KMeans(String),

    #[error("silhouette requires 2 <= k <= n-1, got k={k}, n={n}")]
    SilhouetteRange { k: usize, n: usize },

    #[error("classification: {0}")]
    Classify(String),

    #[error("topic model: {0}")]
    Topics(String),

    #[error("gazetteer {path}: surface \"{surface}\" mapped to both {first} and {second}")]
    GazetteerConflict {
        path: String,
        surface: String,
        first: String,
        second: String,
    },

    #[error("gazetteer {path}:{row}: {message}")]
    GazetteerParse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("category distribution: {0}")]
    Analysis(String),

    #[error("report validation failed: {0}")]
    Report(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing stage artifact: {0}")]
    MissingArtifact(String),
}
