use thiserror::Error;

/// Errors raised across the navigation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions, invalid hyperparameters or bad configuration keys.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed or insufficient input data.
    #[error("input error: {0}")]
    Input(String),
    /// Numerical failure while training (non-finite loss or gradient).
    #[error("training error: {0}")]
    Training(String),
    /// Broken internal bookkeeping, e.g. a stale gradient tape.
    #[error("internal error: {0}")]
    Internal(String),
    /// Event stream violated ordering or framing rules.
    #[error("stream error: {0}")]
    Stream(String),
    /// A recurrent predictor has fewer buffered samples than its window needs.
    #[error("warming up: {have} of {need} samples buffered")]
    Warmup { have: usize, need: usize },
    /// Single-step position prediction requested before a warm start.
    #[error("position model requires a warm start before single-step prediction")]
    InitializationRequired,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Training(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
