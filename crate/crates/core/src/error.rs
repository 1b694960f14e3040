use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    Invalid(ValidationReport),

    #[error("domain error: {0}")]
    Domain(String),

    /// The adaptive integrator could not meet its tolerance.
    #[error("ODE step failure at x = {x} (step {step:e})")]
    StepFailure { x: f64, step: f64 },

    #[error("no finite bound: {0}")]
    NoFiniteBound(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("relation untestable at z = {0}")]
    Untestable(String),

    #[error("identity form inapplicable at x = {0}")]
    IdentityInapplicable(f64),

    #[error("ambiguous eigenvalue near E = {0}")]
    AmbiguousEigenvalue(f64),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
