//! Data handling, experiment orchestration and reporting for ordinal
//! multi-view classification.

pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod report;
pub mod synth;

pub use config::ExperimentConfig;
pub use error::PipelineError;
pub use experiment::{run_experiment, run_experiment_on};
pub use grid::ExperimentGrid;
