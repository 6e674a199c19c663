//! Small dense feed-forward networks with hand-written backpropagation.
//!
//! Shared by the random policies (forward only) and by the members of the
//! dynamics ensemble (trained with a Gaussian negative log-likelihood head).

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Lower bound of the log-variance soft clamp.
pub const LOGVAR_MIN: f64 = -10.0;
/// Upper bound of the log-variance soft clamp.
pub const LOGVAR_MAX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Weights and biases of a fully connected network.
///
/// `weights[l]` has shape `(layer_sizes[l + 1], layer_sizes[l])`. Hidden
/// layers use `activation`; the output layer is linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn check_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least an input and an output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl MlpParams {
    /// Fan-in scaled uniform initialization, zero biases.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        let mut rng = seed::rng(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-bound..=bound)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    /// Every weight and bias drawn uniformly from `[-scale, scale]`.
    pub fn uniform(
        layer_sizes: &[usize],
        activation: Activation,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            weights.push(Array2::from_shape_fn((pair[1], pair[0]), |_| {
                rng.random_range(-scale..=scale)
            }));
            biases.push(Array1::from_shape_fn(pair[1], |_| {
                rng.random_range(-scale..=scale)
            }));
        }
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    /// All-zero parameters of the given shape.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights: layer_sizes
                .windows(2)
                .map(|p| Array2::zeros((p[1], p[0])))
                .collect(),
            biases: layer_sizes.windows(2).map(|p| Array1::zeros(p[1])).collect(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated layer sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Checks that shapes agree with `layer_sizes` and every entry is finite.
    pub fn validate(&self) -> Result<()> {
        check_layer_sizes(&self.layer_sizes)?;
        let layers = self.layer_sizes.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::shape("number of layers", layers, self.weights.len()));
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].dim() != (pair[1], pair[0]) {
                return Err(Error::Config(format!(
                    "layer {l} weight shape {:?} does not match sizes {:?}",
                    self.weights[l].dim(),
                    (pair[1], pair[0])
                )));
            }
            if self.biases[l].len() != pair[1] {
                return Err(Error::shape("bias length", pair[1], self.biases[l].len()));
            }
        }
        let finite = self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Config("non-finite network parameter".into()));
        }
        Ok(())
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), input.len()));
        }
        let mut current = input.to_vec();
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = b.to_vec();
            for (out, row) in next.iter_mut().zip(w.rows()) {
                *out += row.iter().zip(&current).map(|(wi, xi)| wi * xi).sum::<f64>();
            }
            if l < last {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            current = next;
        }
        Ok(current)
    }

    /// Batched forward pass; rows of `inputs` are samples.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(inputs)?.pop().expect("at least one layer").1)
    }

    /// Returns `(pre_activation, activation)` for every layer.
    fn forward_cached(&self, inputs: ArrayView2<f64>) -> Result<Vec<(Array2<f64>, Array2<f64>)>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), inputs.ncols()));
        }
        let last = self.num_layers() - 1;
        let mut cache: Vec<(Array2<f64>, Array2<f64>)> = Vec::with_capacity(self.num_layers());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = {
                let prev = match cache.last() {
                    Some((_, a)) => a.view(),
                    None => inputs,
                };
                prev.dot(&w.t()) + b
            };
            let a = if l < last {
                z.mapv(|v| self.activation.apply(v))
            } else {
                z.clone()
            };
            cache.push((z, a));
        }
        Ok(cache)
    }

    /// Mean loss over the rows of `inputs` and its exact gradient.
    pub fn loss_and_gradients(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        loss: Loss,
    ) -> Result<(f64, Gradients)> {
        let cache = self.forward_cached(inputs)?;
        let output = &cache.last().expect("at least one layer").1;
        let (value, mut upstream) = loss.evaluate(output.view(), targets)?;

        let n_layers = self.num_layers();
        let mut d_weights = Vec::with_capacity(n_layers);
        let mut d_biases = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let delta = if l == n_layers - 1 {
                upstream
            } else {
                let (z, a) = &cache[l];
                let mut d = upstream;
                Zip::from(&mut d)
                    .and(z)
                    .and(a)
                    .for_each(|d, &z, &a| *d *= self.activation.derivative(z, a));
                d
            };
            let prev = if l == 0 { inputs } else { cache[l - 1].1.view() };
            d_weights.push(delta.t().dot(&prev));
            d_biases.push(delta.sum_axis(Axis(0)));
            upstream = delta.dot(&self.weights[l]);
        }
        d_weights.reverse();
        d_biases.reverse();
        Ok((
            value,
            Gradients {
                weights: d_weights,
                biases: d_biases,
            },
        ))
    }
}

/// Gradients with the same shapes as the [`MlpParams`] they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Per-dimension Gaussian prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianOutput {
    pub mean: Vec<f64>,
    pub log_variance: Vec<f64>,
}

impl GaussianOutput {
    /// Splits a raw head output `[mean | raw_logvar]`, soft-clamping the
    /// log-variance half.
    pub fn from_head(raw: &[f64]) -> Result<Self> {
        if !raw.len().is_multiple_of(2) {
            return Err(Error::shape("gaussian head (even width)", raw.len() + 1, raw.len()));
        }
        let d = raw.len() / 2;
        Ok(GaussianOutput {
            mean: raw[..d].to_vec(),
            log_variance: raw[d..].iter().map(|&r| soft_clamp(r).0).collect(),
        })
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smoothly squashes a raw log-variance into `[LOGVAR_MIN, LOGVAR_MAX]`.
/// Returns the clamped value and its derivative.
pub fn soft_clamp(raw: f64) -> (f64, f64) {
    let upper = LOGVAR_MAX - softplus(LOGVAR_MAX - raw);
    let value = LOGVAR_MIN + softplus(upper - LOGVAR_MIN);
    // The double softplus overshoots LOGVAR_MAX by at most ~1e-6.
    if value >= LOGVAR_MAX {
        return (LOGVAR_MAX, 0.0);
    }
    (value, sigmoid(LOGVAR_MAX - raw) * sigmoid(upper - LOGVAR_MIN))
}

/// Sum over dimensions of the Gaussian negative log-likelihood.
pub fn gaussian_nll(pred: &GaussianOutput, target: &[f64]) -> Result<f64> {
    if pred.mean.len() != pred.log_variance.len() {
        return Err(Error::shape(
            "gaussian log-variance",
            pred.mean.len(),
            pred.log_variance.len(),
        ));
    }
    if target.len() != pred.mean.len() {
        return Err(Error::shape("gaussian target", pred.mean.len(), target.len()));
    }
    let ln_2pi = (2.0 * PI).ln();
    Ok(pred
        .mean
        .iter()
        .zip(&pred.log_variance)
        .zip(target)
        .map(|((m, lv), t)| 0.5 * (ln_2pi + lv + (t - m).powi(2) * (-lv).exp()))
        .sum())
}

/// Training objective applied to the network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// `Σ_d (y_d - t_d)²` per sample.
    SquaredError,
    /// Output is `[mean | raw_logvar]`, twice the target width.
    GaussianNll,
}

impl Loss {
    /// Mean per-sample loss and its gradient with respect to the output.
    fn evaluate(self, output: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
        let n = output.nrows();
        if targets.nrows() != n {
            return Err(Error::shape("target rows", n, targets.nrows()));
        }
        let scale = 1.0 / n.max(1) as f64;
        match self {
            Loss::SquaredError => {
                if targets.ncols() != output.ncols() {
                    return Err(Error::shape("target width", output.ncols(), targets.ncols()));
                }
                let diff = &output - &targets;
                let value = diff.iter().map(|d| d * d).sum::<f64>() * scale;
                Ok((value, diff * (2.0 * scale)))
            }
            Loss::GaussianNll => {
                let d = targets.ncols();
                if output.ncols() != 2 * d {
                    return Err(Error::shape("gaussian head width", 2 * d, output.ncols()));
                }
                let ln_2pi = (2.0 * PI).ln();
                let mut grad = Array2::zeros(output.raw_dim());
                let mut value = 0.0;
                for ((out, t), mut g) in output
                    .rows()
                    .into_iter()
                    .zip(targets.rows())
                    .zip(grad.rows_mut())
                {
                    for j in 0..d {
                        let (lv, dlv) = soft_clamp(out[d + j]);
                        let inv_var = (-lv).exp();
                        let err = t[j] - out[j];
                        value += 0.5 * (ln_2pi + lv + err * err * inv_var);
                        g[j] = -err * inv_var * scale;
                        g[d + j] = 0.5 * (1.0 - err * err * inv_var) * dlv * scale;
                    }
                }
                Ok((value * scale, grad))
            }
        }
    }
}

/// Adaptive-moment optimizer state for one network.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(params: &MlpParams) -> Self {
        let zeros = || Gradients {
            weights: params.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: params.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        };
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters are left untouched if any gradient
    /// entry is non-finite.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.weights.len() != params.weights.len() || grads.biases.len() != params.biases.len() {
            return Err(Error::shape("gradient layers", params.weights.len(), grads.weights.len()));
        }
        for l in 0..params.weights.len() {
            if grads.weights[l].dim() != params.weights[l].dim() {
                return Err(Error::shape("gradient weights", params.weights[l].len(), grads.weights[l].len()));
            }
            if grads.biases[l].len() != params.biases[l].len() {
                return Err(Error::shape("gradient biases", params.biases[l].len(), grads.biases[l].len()));
            }
            let finite = grads.weights[l].iter().all(|g| g.is_finite())
                && grads.biases[l].iter().all(|g| g.is_finite());
            if !finite {
                return Err(Error::NonFiniteGradient { layer: l });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..params.weights.len() {
            Zip::from(&mut params.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&grads.weights[l])
                .for_each(update);
            Zip::from(&mut params.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&grads.biases[l])
                .for_each(update);
        }
        Ok(())
    }
}

/// Mean and log-variance halves of a batched Gaussian head output.
pub fn split_head(output: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let d = output.ncols() / 2;
    let mean = output.slice(s![.., ..d]).to_owned();
    let logvar = output.slice(s![.., d..]).mapv(|r| soft_clamp(r).0);
    (mean, logvar)
}
