use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse {what}: {msg}")]
    Parse { what: &'static str, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("no accepted draw after {attempts} attempts ({context})")]
    BudgetExhausted { attempts: u64, context: String },

    #[error("fixed-point iteration did not converge at s = {s} after {iterations} iterations")]
    NonConvergence { s: f64, iterations: u64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid Lukasiewicz path: {0}")]
    InvalidPath(String),

    #[error("walk needs at least one non-root vertex")]
    EmptyWalk,

    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Parse {
            what,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
