use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates one of the configuration invariants.
    #[error("invalid config: {invariant} (got {value})")]
    InvalidConfig { invariant: String, value: String },

    /// Caller broke an operation precondition (index range, shape, finiteness).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("singular state: total population sum is {0}")]
    SingularState(f64),

    /// An integration step produced a genuinely negative population fraction.
    #[error("step size too large: x[class {class}, sector {sector}] = {value:e} after step at t = {time}")]
    StepTooLarge {
        class: usize,
        sector: usize,
        value: f64,
        time: f64,
    },

    #[error("conservation violated at t = {time}: {quantity} drifted by {drift:e} (tolerance {tolerance:e})")]
    ConservationViolation {
        quantity: &'static str,
        drift: f64,
        tolerance: f64,
        time: f64,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid sweep point: eta = {0} (must lie in [0, 0.5])")]
    InvalidSweepPoint(f64),

    #[error("underdetermined fit: {0}")]
    UnderdeterminedFit(String),

    #[error("instance too large for the naive oracle: n*m = {size} exceeds {limit}")]
    InstanceTooLarge { size: usize, limit: usize },

    /// Structured-document parse failure; `location` carries line/column or key.
    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(invariant: impl Into<String>, value: impl std::fmt::Display) -> Self {
        Error::InvalidConfig {
            invariant: invariant.into(),
            value: value.to_string(),
        }
    }
}
