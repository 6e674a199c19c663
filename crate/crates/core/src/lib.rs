//! Benchmark of bootstrap data-gathering strategies for learned dynamics
//! models.
//!
//! Random policies, random actions and their even-split hybrid gather data
//! on two simulated tasks; probabilistic ensembles are fitted to that data
//! and scored on multi-step prediction error against Novelty Search
//! trajectories.

pub mod datagen;
pub mod envs;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod ns;
pub mod seed;

pub use error::{Error, Result};
