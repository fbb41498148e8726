use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A transition matrix is not row-stochastic with strictly positive entries.
    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),

    /// Input data is degenerate for the requested computation.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// An iterative numerical routine failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A non-finite value entered a computation that requires finite inputs.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The detector already raised an alarm; call `reset` to re-arm it.
    #[error("detector already alarmed at step {0}")]
    AlreadyAlarmed(u64),

    /// Pre- and post-change regimes cannot be told apart.
    #[error("scenario `{0}` is indistinguishable: estimated discrepancy {1:e}")]
    Indistinguishable(String, f64),

    /// Too many runs in a Monte-Carlo cell alarmed before the changepoint.
    #[error("{rate:.3} of runs false-alarmed before changepoint {changepoint}")]
    PreChangeAlarms { changepoint: u64, rate: f64 },

    /// Threshold calibration could not bracket the target.
    #[error("calibration bracket failed: target {target}, MTFA range [{lo}, {hi}]")]
    Bracketing { target: f64, lo: f64, hi: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
