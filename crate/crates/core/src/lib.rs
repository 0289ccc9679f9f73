//! Kinetic income-exchange model with taxation, uniform redistribution and
//! sectors of taxpayers that evade to different degrees.
//!
//! The population is split into `n` income classes and `m` evasion sectors.
//! [`model::CoefficientTables`] holds everything the dynamics need,
//! [`integrator`] drives a state to its stationary distribution and
//! [`metrics`] summarizes it. [`experiments`] bundles the standard studies.

pub mod config;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod io;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod state;
pub mod validation;

pub use config::{ModelConfig, TaxSchedule};
pub use error::{Error, Result};
pub use experiments::InitialConditionSpec;
pub use integrator::{IntegrationOptions, StationaryResult};
pub use metrics::MetricsReport;
pub use model::CoefficientTables;
pub use state::PopulationState;
