//! Scenario runner, file formats and command line around `swarmloc-core`.
//!
//! - [`config`]: TOML run configuration.
//! - [`log`]: line-delimited JSON observation logs.
//! - [`pipeline`]: simulate, solve with either method, extend to the whole
//!   swarm and score against ground truth.
//! - [`report`]: the JSON run report.
//! - [`sweep`]: parallel ensembles over one scenario parameter, with CSV
//!   aggregates.

pub mod config;
pub mod log;
pub mod pipeline;
pub mod report;
pub mod sweep;

use std::path::Path;

pub use config::{ConfigFile, Method, PipelineOptions, RunConfig};
pub use pipeline::{run_scenario, solve_rounds};
pub use report::RunReport;
pub use swarmloc_core as core;
pub use sweep::{run_sweep, run_sweep_with, SweepAxis, SweepResult, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Sim(#[from] swarmloc_core::sim::SimError),
    #[error(transparent)]
    Solver(#[from] swarmloc_core::optim::OptimError),
}

impl Error {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Error::Io(format!("{}: {e}", path.display()))
    }
}
