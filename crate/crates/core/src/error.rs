use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("correlation matrix is not positive semi-definite (smallest pivot {pivot:.3e})")]
    NotPsd { pivot: f64 },

    #[error("non-finite state on path {path} at step {step}")]
    NonFinite { path: usize, step: usize },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("regression needs at least {needed} paths for {basis} basis functions, got {paths}")]
    IllConditioned { needed: usize, basis: usize, paths: usize },

    #[error("no surviving paths at step {step}")]
    NoSurvivors { step: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed strategy on path {path}: {reason}")]
    MalformedStrategy { path: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("symmetry validation failed: {}", .0.join("; "))]
    Symmetry(Vec<String>),

    #[error("exhaustive bound exceeded: {count} strategy pairs on path {path} (bound {bound})")]
    BoundExceeded { path: usize, count: usize, bound: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EngineError>;
