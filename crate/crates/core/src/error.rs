use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the requested quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{k} is not an equilibrium: f({k}) = {f_k}, expected 1")]
    NotEquilibrium { k: f64, f_k: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not enough usable points: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by user-supplied parameters rather than by the
    /// environment. The CLI maps these to exit status 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::NotEquilibrium { .. } | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
