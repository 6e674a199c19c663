//! Probabilistic ensemble dynamics model.
//!
//! Each member maps a normalized `(state, action)` to a Gaussian over the
//! normalized state delta. Point predictions average the member means.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{policy_action, ActionSchedule, Dataset};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Loss, MlpParams};
use crate::seed;

const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub ensemble_size: usize,
    pub bootstrap_fraction: f64,
    /// Hidden layer widths of every member.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 64,
            learning_rate: 1e-3,
            ensemble_size: 5,
            bootstrap_fraction: 1.0,
            hidden: vec![64, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.ensemble_size < 2 {
            return Err(Error::Config("an ensemble needs at least two members".into()));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::Config("bootstrap_fraction must lie in (0, 1]".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Per-dimension affine standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Column statistics of `data`. Each column is summed in sorted order,
    /// so the result does not depend on row order.
    pub fn fit(data: &Array2<f64>) -> Self {
        let n = data.nrows().max(1) as f64;
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for column in data.columns() {
            let mut sorted = column.to_vec();
            sorted.sort_by(f64::total_cmp);
            let m = sorted.iter().sum::<f64>() / n;
            let var = sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            std.push(var.sqrt().max(STD_FLOOR));
        }
        Normalizer { mean, std }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    fn normalize_rows(&self, data: &Array2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        (data - &mean) / &std
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberTraining {
    /// Mean NLL over the member's resample before the first update.
    pub initial_nll: f64,
    /// Mean NLL over the member's resample after the final epoch.
    pub final_nll: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub state_dim: usize,
    pub action_dim: usize,
    pub members: Vec<MlpParams>,
    pub input_normalizer: Normalizer,
    pub target_normalizer: Normalizer,
    pub config: TrainConfig,
    pub seed: u64,
    pub training: Vec<MemberTraining>,
}

/// Bootstrap resample (with replacement) for every member.
pub fn bootstrap_indices(n_samples: usize, config: &TrainConfig, seed: u64) -> Vec<Vec<usize>> {
    let draws = ((config.bootstrap_fraction * n_samples as f64).round() as usize).max(1);
    (0..config.ensemble_size)
        .map(|m| {
            let mut rng = seed::rng(seed::derive_seed(seed, &[m as u64, 0]));
            (0..draws).map(|_| rng.random_range(0..n_samples)).collect()
        })
        .collect()
}

fn model_inputs(dataset: &Dataset) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[dataset.states.view(), dataset.actions.view()])
        .expect("states and actions have equal row counts")
}

pub fn fit(dataset: &Dataset, config: &TrainConfig, seed: u64) -> Result<EnsembleModel> {
    if dataset.is_empty() {
        return Err(Error::Usage("cannot fit a model on an empty dataset".into()));
    }
    config.validate()?;
    let indices = bootstrap_indices(dataset.len(), config, seed);
    fit_with_indices(dataset, config, seed, &indices)
}

/// Trains member `m` on `dataset` rows `indices[m]`.
pub fn fit_with_indices(
    dataset: &Dataset,
    config: &TrainConfig,
    seed: u64,
    indices: &[Vec<usize>],
) -> Result<EnsembleModel> {
    if dataset.is_empty() {
        return Err(Error::Usage("cannot fit a model on an empty dataset".into()));
    }
    config.validate()?;
    if indices.len() != config.ensemble_size {
        return Err(Error::shape("resample sets", config.ensemble_size, indices.len()));
    }
    if let Some(&bad) = indices.iter().flatten().find(|&&i| i >= dataset.len()) {
        return Err(Error::Usage(format!("resample index {bad} out of range")));
    }

    let inputs = model_inputs(dataset);
    let deltas = &dataset.next_states - &dataset.states;
    let input_normalizer = Normalizer::fit(&inputs);
    let target_normalizer = Normalizer::fit(&deltas);
    let x = input_normalizer.normalize_rows(&inputs);
    let y = target_normalizer.normalize_rows(&deltas);

    let state_dim = dataset.state_dim();
    let mut layer_sizes = vec![x.ncols()];
    layer_sizes.extend(&config.hidden);
    layer_sizes.push(2 * state_dim);

    let mut members = Vec::with_capacity(config.ensemble_size);
    let mut training = Vec::with_capacity(config.ensemble_size);
    for (m, rows) in indices.iter().enumerate() {
        let init_seed = seed::derive_seed(seed, &[m as u64, 1]);
        let mut shuffle_rng = seed::rng(seed::derive_seed(seed, &[m as u64, 2]));
        let mut params = MlpParams::init(&layer_sizes, Activation::Tanh, init_seed)?;
        let mut optimizer = Adam::new(&params);

        let xm = x.select(Axis(0), rows);
        let ym = y.select(Axis(0), rows);
        let initial_nll = params.loss_and_gradients(xm.view(), ym.view(), Loss::GaussianNll)?.0;

        let mut order: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..config.epochs {
            order.shuffle(&mut shuffle_rng);
            for batch in order.chunks(config.batch_size) {
                let xb = xm.select(Axis(0), batch);
                let yb = ym.select(Axis(0), batch);
                let (_, grads) = params.loss_and_gradients(xb.view(), yb.view(), Loss::GaussianNll)?;
                optimizer.step(&mut params, &grads, config.learning_rate)?;
            }
        }
        let final_nll = params.loss_and_gradients(xm.view(), ym.view(), Loss::GaussianNll)?.0;
        members.push(params);
        training.push(MemberTraining {
            initial_nll,
            final_nll,
        });
    }

    Ok(EnsembleModel {
        state_dim,
        action_dim: dataset.action_dim(),
        members,
        input_normalizer,
        target_normalizer,
        config: config.clone(),
        seed,
        training,
    })
}

/// Action source for model rollouts.
#[derive(Clone, Copy, Debug)]
pub enum Controller<'a> {
    Policy(&'a MlpParams),
    Schedule(&'a ActionSchedule),
}

impl Controller<'_> {
    pub fn action(&self, spec: &EnvSpec, step: usize, state: &[f64]) -> Result<Vec<f64>> {
        match self {
            Controller::Policy(p) => policy_action(spec, p, state),
            Controller::Schedule(s) => Ok(s.action_at(step).to_vec()),
        }
    }
}

impl EnsembleModel {
    fn check_inputs(&self, state: &[f64], action: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::shape("model state", self.state_dim, state.len()));
        }
        if action.len() != self.action_dim {
            return Err(Error::shape("model action", self.action_dim, action.len()));
        }
        if !state.iter().chain(action).all(|v| v.is_finite()) {
            return Err(Error::Usage("non-finite model input".into()));
        }
        Ok(())
    }

    /// De-normalized mean state delta of every member.
    pub fn member_deltas(&self, state: &[f64], action: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_inputs(state, action)?;
        let mut input = state.to_vec();
        input.extend_from_slice(action);
        let z = self.input_normalizer.normalize(&input);
        self.members
            .iter()
            .map(|m| {
                let out = m.forward(&z)?;
                Ok(self.target_normalizer.denormalize(&out[..self.state_dim]))
            })
            .collect()
    }

    pub fn predict_step(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let deltas = self.member_deltas(state, action)?;
        let k = deltas.len() as f64;
        Ok((0..self.state_dim)
            .map(|d| state[d] + deltas.iter().map(|m| m[d]).sum::<f64>() / k)
            .collect())
    }

    /// Mean over output dimensions of the population variance of the
    /// member means.
    pub fn predict_uncertainty(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let deltas = self.member_deltas(state, action)?;
        let k = deltas.len() as f64;
        let total: f64 = (0..self.state_dim)
            .map(|d| {
                let mean = deltas.iter().map(|m| m[d]).sum::<f64>() / k;
                deltas.iter().map(|m| (m[d] - mean).powi(2)).sum::<f64>() / k
            })
            .sum();
        Ok(total / self.state_dim as f64)
    }

    /// Recursive prediction. Stops early at the first non-finite state and
    /// reports the step index at which it appeared.
    pub fn rollout_partial(
        &self,
        spec: &EnvSpec,
        controller: Controller<'_>,
        start: &[f64],
        n_steps: usize,
    ) -> Result<(Vec<Vec<f64>>, Option<usize>)> {
        let mut trajectory = Vec::with_capacity(n_steps + 1);
        trajectory.push(start.to_vec());
        for t in 0..n_steps {
            let state = &trajectory[t];
            let action = controller.action(spec, t, state)?;
            let next = self.predict_step(state, &action)?;
            if !next.iter().all(|v| v.is_finite()) {
                return Ok((trajectory, Some(t + 1)));
            }
            trajectory.push(next);
        }
        Ok((trajectory, None))
    }

    pub fn rollout(
        &self,
        spec: &EnvSpec,
        controller: Controller<'_>,
        start: &[f64],
        n_steps: usize,
    ) -> Result<Vec<Vec<f64>>> {
        if n_steps == 0 {
            return Err(Error::Usage("a rollout needs at least one step".into()));
        }
        match self.rollout_partial(spec, controller, start, n_steps)? {
            (trajectory, None) => Ok(trajectory),
            (_, Some(step)) => Err(Error::Diverged { step }),
        }
    }
}

/// Mean over steps `t ≥ 1` of the Euclidean distance between states.
pub fn prediction_error<P: AsRef<[f64]>, T: AsRef<[f64]>>(predicted: &[P], truth: &[T]) -> Result<f64> {
    check_trajectories(predicted, truth)?;
    let dim = truth[0].as_ref().len();
    prediction_error_dims(predicted, truth, &(0..dim).collect::<Vec<_>>())
}

/// As [`prediction_error`], restricted to the listed state dimensions.
pub fn prediction_error_dims<P: AsRef<[f64]>, T: AsRef<[f64]>>(
    predicted: &[P],
    truth: &[T],
    dims: &[usize],
) -> Result<f64> {
    check_trajectories(predicted, truth)?;
    let dim = truth[0].as_ref().len();
    if let Some(&bad) = dims.iter().find(|&&d| d >= dim) {
        return Err(Error::Usage(format!("dimension {bad} outside a {dim}-dimensional state")));
    }
    let steps = predicted.len() - 1;
    let total: f64 = predicted[1..]
        .iter()
        .zip(&truth[1..])
        .map(|(p, t)| {
            let (p, t) = (p.as_ref(), t.as_ref());
            dims.iter().map(|&d| (p[d] - t[d]).powi(2)).sum::<f64>().sqrt()
        })
        .sum();
    Ok(total / steps as f64)
}

fn check_trajectories<P: AsRef<[f64]>, T: AsRef<[f64]>>(predicted: &[P], truth: &[T]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::Usage(format!(
            "trajectory lengths differ: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.len() < 2 {
        return Err(Error::Usage("trajectories need at least two states".into()));
    }
    if predicted
        .iter()
        .zip(truth)
        .any(|(p, t)| p.as_ref().len() != t.as_ref().len())
    {
        return Err(Error::Usage("state dimensions differ".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{self, Method};
    use crate::envs::EnvName;

    pub(crate) fn zero_model(state_dim: usize, action_dim: usize, members: usize) -> EnsembleModel {
        let sizes = [state_dim + action_dim, 4, 2 * state_dim];
        EnsembleModel {
            state_dim,
            action_dim,
            members: (0..members)
                .map(|_| MlpParams::zeros(&sizes, Activation::Tanh).unwrap())
                .collect(),
            input_normalizer: Normalizer {
                mean: vec![0.0; state_dim + action_dim],
                std: vec![1.0; state_dim + action_dim],
            },
            target_normalizer: Normalizer {
                mean: vec![0.0; state_dim],
                std: vec![1.0; state_dim],
            },
            config: TrainConfig::default(),
            seed: 0,
            training: Vec::new(),
        }
    }

    #[test]
    fn zero_delta_model_is_identity() {
        let m = zero_model(3, 2, 3);
        let s = [0.5, -1.0, 2.0];
        assert_eq!(m.predict_step(&s, &[0.1, 0.2]).unwrap(), s.to_vec());
        assert_eq!(m.predict_uncertainty(&s, &[0.1, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn opposite_members_cancel() {
        let mut m = zero_model(2, 1, 2);
        m.members[0].biases[1][0] = 0.75;
        m.members[1].biases[1][0] = -0.75;
        let s = [1.0, 2.0];
        assert_eq!(m.predict_step(&s, &[0.0]).unwrap(), s.to_vec());
    }

    #[test]
    fn two_point_uncertainty() {
        let mut m = zero_model(2, 1, 2);
        m.members[0].biases[1][1] = 1.0;
        m.members[1].biases[1][1] = -1.0;
        // Per-dim variances [0, 1], averaged over 2 dims.
        assert_eq!(m.predict_uncertainty(&[0.0, 0.0], &[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let m = zero_model(2, 1, 2);
        assert!(matches!(m.predict_step(&[f64::NAN, 0.0], &[0.0]), Err(Error::Usage(_))));
        assert!(matches!(m.predict_step(&[0.0, 0.0], &[f64::INFINITY]), Err(Error::Usage(_))));
        assert!(matches!(m.predict_step(&[0.0], &[0.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn rollout_base_case_and_identity() {
        let spec = EnvSpec::new(EnvName::BallInCup);
        let m = zero_model(6, 3, 2);
        let policy = datagen::sample_random_policy(&spec, 1);
        let start = crate::envs::reset(&spec).values;
        let t = m.rollout(&spec, Controller::Policy(&policy), &start, 1).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[1], m.predict_step(&start, &datagen::policy_action(&spec, &policy, &start).unwrap()).unwrap());
        let t = m.rollout(&spec, Controller::Policy(&policy), &start, 25).unwrap();
        assert!(t.iter().all(|s| *s == start));
        assert!(m.rollout(&spec, Controller::Policy(&policy), &start, 0).is_err());
    }

    #[test]
    fn diverging_rollout_reports_step() {
        let spec = EnvSpec::new(EnvName::BallInCup);
        let mut m = zero_model(6, 3, 2);
        for member in &mut m.members {
            member.biases[1][0] = 1e308;
        }
        let schedule = datagen::sample_action_schedule(&spec, 10, 0).unwrap();
        let start = crate::envs::reset(&spec).values;
        match m.rollout(&spec, Controller::Schedule(&schedule), &start, 10) {
            Err(Error::Diverged { step }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prediction_error_basics() {
        let a = vec![vec![0.0; 4], vec![1.0; 4]];
        assert_eq!(prediction_error(&a, &a).unwrap(), 0.0);
        let b = vec![vec![0.0; 4], vec![4.0, 5.0, 1.0, 1.0]];
        assert_eq!(prediction_error(&a, &b).unwrap(), 5.0);
        assert!(prediction_error(&a, &a[..1]).is_err());
        assert!(prediction_error(&a[..1], &a[..1]).is_err());
        assert_eq!(prediction_error_dims(&a, &b, &[0]).unwrap(), 3.0);
    }

    #[test]
    fn normalizer_round_trip() {
        let spec = EnvSpec::new(EnvName::BallInCup);
        let d = datagen::gather(&spec, Method::Rarph, 2, 10, 4).unwrap();
        let inputs = model_inputs(&d);
        let n = Normalizer::fit(&inputs);
        assert!(n.std.iter().all(|&s| s >= STD_FLOOR));
        for row in inputs.rows() {
            let x = row.to_vec();
            let back = n.denormalize(&n.normalize(&x));
            assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() <= 1e-12));
        }
    }

    #[test]
    fn constant_column_is_floored() {
        let data = Array2::from_shape_vec((3, 2), vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        let n = Normalizer::fit(&data);
        assert_eq!(n.std[1], STD_FLOOR);
        assert_eq!(n.mean, vec![2.0, 5.0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.ensemble_size = 1));
        assert!(bad(|c| c.bootstrap_fraction = 0.0));
        assert!(bad(|c| c.bootstrap_fraction = 1.5));
        assert!(bad(|c| c.epochs = 0));
        assert!(bad(|c| c.learning_rate = -1.0));
    }
}
