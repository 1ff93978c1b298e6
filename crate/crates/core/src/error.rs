use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step {t} exceeds horizon {horizon}")]
    HorizonExceeded { t: usize, horizon: usize },

    #[error("{0}")]
    Domain(String),

    #[error("design state not fitted: {0}")]
    State(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("not supported for this environment: {0}")]
    Capability(String),

    #[error("behavior policy assigns zero probability on a reachable path (t={t}, arm={arm})")]
    UnboundedBound { t: usize, arm: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
