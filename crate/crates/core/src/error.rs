use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("curve is not convex at node {index}: second difference {value:e}")]
    NonConvex { index: usize, value: f64 },

    #[error("operation requires a positive-half-line domain")]
    RequiresPositiveDomain,

    #[error("operation is defined for drift-free problems only")]
    DriftNotAllowed,

    #[error("time step {dt:e} exceeds stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("negative density {value:e} at node {index} exceeds tolerance")]
    NegativeDensity { index: usize, value: f64 },

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures raised while integrating or transforming data,
    /// as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvex { .. }
                | Error::Stability { .. }
                | Error::NegativeDensity { .. }
                | Error::Numerical(_)
                | Error::Io { .. }
        )
    }
}
