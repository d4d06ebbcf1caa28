use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "matrix is not positive definite after jitter (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("cholesky pivot {index} is non-positive ({pivot:e}) after jitter")]
    PivotFailure { index: usize, pivot: f64 },

    #[error("predictive variance {0:e} is below the clamp threshold; factorization is broken")]
    NegativeVariance(f64),

    #[error("transition out of order: ({episode}, {step}) cannot follow {after}")]
    OutOfOrder {
        episode: usize,
        step: usize,
        after: String,
    },

    #[error("unknown environment `{name}`; available: {}", catalog.join(", "))]
    UnknownEnvironment { name: String, catalog: Vec<String> },

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("oracle check failed: {0}")]
    Oracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
