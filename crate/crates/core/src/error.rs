use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("content created at t_c={t_c} is outside the window z={window} at t={t}")]
    OutOfWindow { t: u64, t_c: u64, window: u64 },

    #[error("user {user} still has no incoming edges after {attempts} resampling attempts")]
    IsolatedUser { user: usize, attempts: usize },

    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    PowerIteration { iterations: usize, estimate: f64 },

    #[error("singular system: {0}")]
    Singular(&'static str),

    #[error("QP solver stopped after {iterations} iterations with KKT residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no eligible content")]
    NoContent,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("{path}: row {row}: {message}")]
    MalformedRow { path: PathBuf, row: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("at t={t}: {source}")]
    AtStep {
        t: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_step(self, t: u64) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep { t, source: Box::new(e) },
        }
    }
}
