use thiserror::Error;

/// Errors raised by spectrum computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("resource cap exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: String,
        requested: u128,
        cap: u128,
    },

    #[error("oracle contract violated: {0}")]
    OracleContract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("all {trials} trials went extinct (survival fraction {survival_fraction})")]
    Extinction { trials: usize, survival_fraction: f64 },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("word too short: need {needed} letters, have {available}")]
    InsufficientWord { needed: usize, available: usize },

    #[error("horizon exceeded: query at {requested} but horizon is {horizon}")]
    Horizon { requested: u64, horizon: u64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn resource(what: impl Into<String>, requested: u128, cap: u128) -> Self {
        Error::Resource {
            what: what.into(),
            requested,
            cap,
        }
    }

    /// True for errors caused by a configured cap rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Rejects θ outside the open unit interval.
pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("theta must lie in (0,1), got {theta}")))
    }
}
