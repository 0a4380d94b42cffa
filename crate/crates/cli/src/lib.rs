//! Configuration, orchestration and artifact output for the `aoi` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod recipes;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{run, Outcome};
