//! Reproducible experiment pipeline: configuration, artifacts and the
//! grid runner.

pub mod config;
pub mod evaluate;
pub mod io;
pub mod run;

pub use config::{CellKey, ExperimentConfig};
pub use run::{run_experiment, RunManifest, RunOptions};
