use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry ({context}): rank {rank}")]
    DegenerateGeometry { context: String, rank: usize },

    #[error("ground plane not found: {0}")]
    PlaneNotFound(String),

    #[error("numerical failure in {context} at point {point:?}")]
    NumericalFailure { context: String, point: Vec<f64> },

    #[error("initialization failed for endcap {endcap}: only {points} usable points")]
    InitializationFailure { endcap: usize, points: usize },

    #[error("infeasible trajectory at frame {frame}: {reason}")]
    InfeasibleTrajectory { frame: usize, reason: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Attach frame/iteration context to a numerical failure.
    pub fn with_context(self, extra: &str) -> Self {
        match self {
            Error::NumericalFailure { context, point } => Error::NumericalFailure {
                context: format!("{extra}: {context}"),
                point,
            },
            other => other,
        }
    }
}
