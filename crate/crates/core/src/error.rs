use thiserror::Error;

/// Errors raised by the model, samplers and data layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("empty interval: lower {lower} must be below upper {upper}")]
    Interval { lower: f64, upper: f64 },

    #[error("degenerate weights: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("precision matrix not positive definite: pivot {index} is {pivot}")]
    Factorization { index: usize, pivot: f64 },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("series needs more than {cap} terms to reach mass {target}")]
    Convergence { cap: usize, target: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_)
            | Error::Factorization { .. }
            | Error::Degenerate(_)
            | Error::Convergence { .. } => true,
            Error::Sweep { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
