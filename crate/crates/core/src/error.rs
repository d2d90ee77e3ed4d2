use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value failed validation. `field` is a dotted path.
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An iterative numerical procedure failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The optimization problem has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The induced Markov chain is not unichain or its balance system is rank deficient.
    #[error("ergodicity violated: {0}")]
    Ergodicity(String),

    /// The output quadrature grid does not cover the density support.
    #[error("grid coverage: {0}")]
    Coverage(String),

    /// Training diverged.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
