use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("choice map failed to converge: residual {residual:.3e} after {iterations} bisection steps")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("power iteration did not converge after {0} steps")]
    PowerIteration(usize),

    /// A random-game event the construction depends on does not hold.
    #[error("event {event} does not hold: {detail}")]
    EventFailure { event: &'static str, detail: String },

    #[error("step size {eta} exceeds the admissible cap {cap}")]
    StepSize { eta: f64, cap: f64 },

    #[error("schedule error: {0}")]
    Schedule(String),

    /// Every learner action is a best response; envelopes are identically zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
