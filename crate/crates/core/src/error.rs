use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "draw budget exceeded: {required} coordinate draws requested, budget is {budget}; \
         use the column-power estimator or raise the budget"
    )]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("quadrature did not reach tolerance {tolerance:e} (error estimate {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
