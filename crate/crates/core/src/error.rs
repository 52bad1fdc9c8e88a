use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The per-path event cap was hit before the horizon.
    #[error("simulation budget exceeded: {limit} events reached at t = {time}")]
    BudgetExceeded { limit: u64, time: f64 },

    #[error("ODE step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: f64, right: f64 },

    #[error("summary layout mismatch: {0}")]
    LayoutMismatch(String),

    /// Every simulation received zero weight; increase N or the tolerance.
    #[error("degenerate posterior: all weights are zero")]
    DegenerateWeights,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("regression failed: {0}")]
    Regression(String),

    #[error("training did not converge: {0}")]
    NonConvergence(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("all forward simulations went extinct before the evaluation horizon")]
    ForwardExtinction,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
