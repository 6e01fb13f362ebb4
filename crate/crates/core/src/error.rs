use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown action id {0}")]
    UnknownAction(usize),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("model cell (metric {metric}, action {action}) is cold")]
    ColdModel { metric: usize, action: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Stable short code used in machine-readable error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Empty(_) => "empty",
            Error::UnknownAction(_) => "unknown_action",
            Error::UnknownMetric(_) => "unknown_metric",
            Error::ColdModel { .. } => "cold_model",
            Error::Dimension(_) => "dimension",
            Error::Numerical(_) => "numerical",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
