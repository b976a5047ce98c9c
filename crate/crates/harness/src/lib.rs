//! Experiment configuration, Monte Carlo sweeps and result emission for
//! the `msclab` command-line tool.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use output::{emit, Sidecar, CSV_HEADER};
pub use runner::{run_experiment, Experiment, ResultRow, RunOutput};
