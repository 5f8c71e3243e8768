//! Monte Carlo harness for the irregular-levy estimators: experiment configuration,
//! replications, risk reports and the `levy-bench` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Settings, Target};
pub use error::{BenchError, Result};
pub use experiment::{run_table_experiment, RepRecord, RiskReport};
