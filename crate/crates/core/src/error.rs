use thiserror::Error;

/// Errors raised by the integrators, systems and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last relative change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("fast frequency {value} fell below the floor {floor}")]
    FrequencyFloor { value: f64, floor: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step {step} (t = {time}) failed: {source}")]
    StepFailed {
        step: u64,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Strips any `StepFailed` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } => source.root(),
            other => other,
        }
    }
}
