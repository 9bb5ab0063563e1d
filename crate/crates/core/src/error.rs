use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("integration failed at t = {t:.6} s: {reason}")]
    Integration { t: f64, reason: String },

    #[error("no gait events found")]
    NoEvents,

    #[error("gait event alternation violated at sample indices {indices:?}")]
    EventAlternation { indices: Vec<usize> },

    #[error("no valid strides: {0}")]
    NoValidStrides(String),

    #[error("identification failed: none of {restarts} restarts converged (best cost {best_cost:e})")]
    IdentificationFailed { restarts: usize, best_cost: f64 },

    #[error("closed loop unstable at t = {t:.3} s: |F_m| = {force:.1} N exceeds {limit:.1} N")]
    Unstable { t: f64, force: f64, limit: f64 },

    #[error("step response did not settle: {0}")]
    NotSettled(String),

    #[error("{0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input or configuration, as opposed
    /// to failures during a run.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Config(_) | Error::Parse { .. } | Error::MissingColumn { .. }
        ) || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}
