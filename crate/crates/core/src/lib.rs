//! Seedable N-agent simulator for learning stationary mean-field games along
//! a single non-episodic run, with centralised, independent and networked
//! learning architectures.
//!
//! [`orchestrator::run_trial`] drives one trial from a [`orchestrator::Scenario`];
//! [`cli`] wraps trials into reproducible run directories.

pub mod cli;
pub mod comms;
pub mod config;
pub mod env;
pub mod error;
pub mod io;
pub mod learning;
pub mod metrics;
pub mod orchestrator;
pub mod rng;
pub mod types;

pub use config::{parse_config, ExperimentConfig};
pub use env::GameKind;
pub use error::{Error, Result};
pub use metrics::{Metric, RunLog};
pub use orchestrator::{run_replay, run_theoretical, run_trial, MetricsOptions, RunOutput, Scenario};
pub use types::{Architecture, GridSpec, Hyperparams};
