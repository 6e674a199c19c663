//! Scoring a fitted model against ground-truth suite episodes.

use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::model::{prediction_error, prediction_error_dims, Controller, EnsembleModel};
use crate::ns::ArchiveEntry;

/// Error of one suite trajectory at one prediction horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryError {
    pub horizon: usize,
    pub trajectory_id: usize,
    /// Full-state metric.
    pub error: f64,
    /// Same metric restricted to the outcome dimensions.
    pub outcome_error: f64,
    pub diverged: bool,
}

fn outcome_diameter(spec: &EnvSpec) -> f64 {
    spec.outcome_dims
        .iter()
        .map(|&d| (spec.state_high[d] - spec.state_low[d]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Replays every suite policy on the model from the episode's initial
/// state and compares against the recorded states.
///
/// A horizon longer than an (early-stopped) episode is compared over the
/// episode's actual length. Rows are ordered by horizon, then trajectory.
pub fn evaluate_model(
    model: &EnsembleModel,
    spec: &EnvSpec,
    suite: &[ArchiveEntry],
    horizons: &[usize],
) -> Result<Vec<TrajectoryError>> {
    let max_horizon = *horizons
        .iter()
        .max()
        .ok_or_else(|| Error::Config("no prediction horizons".into()))?;
    if horizons.contains(&0) {
        return Err(Error::Config("prediction horizons must be positive".into()));
    }
    let cap = spec.workspace_diameter();
    let outcome_cap = outcome_diameter(spec);

    let mut per_trajectory = Vec::with_capacity(suite.len());
    for entry in suite {
        let truth = entry.episode.states();
        let length = truth.len().saturating_sub(1);
        if length == 0 {
            return Err(Error::Usage("suite episode without transitions".into()));
        }
        let steps = max_horizon.min(length);
        let (predicted, diverged_at) =
            model.rollout_partial(spec, Controller::Policy(&entry.policy), &truth[0], steps)?;
        per_trajectory.push((truth, predicted, diverged_at));
    }

    let mut rows = Vec::with_capacity(horizons.len() * suite.len());
    for &horizon in horizons {
        for (id, (truth, predicted, diverged_at)) in per_trajectory.iter().enumerate() {
            let n = horizon.min(truth.len() - 1);
            let row = match diverged_at {
                Some(step) if *step <= n => TrajectoryError {
                    horizon,
                    trajectory_id: id,
                    error: cap * n as f64,
                    outcome_error: outcome_cap * n as f64,
                    diverged: true,
                },
                _ => TrajectoryError {
                    horizon,
                    trajectory_id: id,
                    error: prediction_error(&predicted[..=n], &truth[..=n])?,
                    outcome_error: prediction_error_dims(&predicted[..=n], &truth[..=n], &spec.outcome_dims)?,
                    diverged: false,
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}
