//! Small differentiable models with hand-derived gradients.

mod dataset;

pub use dataset::{minibatches, Batch, DataSplit, Dataset, DatasetKind, DatasetSpec, Minibatches};
pub(crate) use dataset::{seeded_rng, STREAM_INIT};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::param::{ParamState, TensorShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    #[default]
    LinearRegression,
    LogisticRegression,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => libm::tanh(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Linear and logistic models are bias-free `1 × input_dim` weight rows. An
/// MLP has one `out × in` weight matrix and one bias vector per layer; its
/// loss is squared error for a single output and softmax cross-entropy
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub l2: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::LinearRegression,
            layer_sizes: Vec::new(),
            activation: Activation::Relu,
            l2: 0.0,
        }
    }
}

impl ModelSpec {
    pub fn linear() -> Self {
        Self::default()
    }

    pub fn logistic() -> Self {
        Self {
            kind: ModelKind::LogisticRegression,
            ..Self::default()
        }
    }

    pub fn mlp(layer_sizes: Vec<usize>, activation: Activation) -> Self {
        Self {
            kind: ModelKind::Mlp,
            layer_sizes,
            activation,
            l2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config(format!("model.l2 = {} must be finite and >= 0", self.l2)));
        }
        if self.kind == ModelKind::Mlp {
            if self.layer_sizes.len() < 2 {
                return Err(Error::config("model.layer_sizes needs at least 2 entries for an mlp"));
            }
            if self.layer_sizes.contains(&0) {
                return Err(Error::config("model.layer_sizes entries must be positive"));
            }
        }
        Ok(())
    }

    /// Binds the spec to an input dimension.
    pub fn build(&self, input_dim: usize) -> Result<Model> {
        self.validate()?;
        if input_dim == 0 {
            return Err(Error::config("input dimension must be positive"));
        }
        let mut layers = Vec::new();
        let mut shapes = Vec::new();
        match self.kind {
            ModelKind::LinearRegression | ModelKind::LogisticRegression => {
                shapes.push(TensorShape::new("weight", vec![1, input_dim]));
            }
            ModelKind::Mlp => {
                if self.layer_sizes[0] != input_dim {
                    return Err(Error::config(format!(
                        "model.layer_sizes[0] = {} does not match the dataset input_dim = {input_dim}",
                        self.layer_sizes[0]
                    )));
                }
                let mut offset = 0;
                for (l, pair) in self.layer_sizes.windows(2).enumerate() {
                    let (fan_in, fan_out) = (pair[0], pair[1]);
                    layers.push(Layer {
                        weight: offset,
                        bias: offset + fan_in * fan_out,
                        fan_in,
                        fan_out,
                    });
                    offset += fan_in * fan_out + fan_out;
                    shapes.push(TensorShape::new(format!("layer{l}.weight"), vec![fan_out, fan_in]));
                    shapes.push(TensorShape::new(format!("layer{l}.bias"), vec![fan_out]));
                }
            }
        }
        Ok(Model {
            spec: self.clone(),
            input_dim,
            layers,
            shapes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    weight: usize,
    bias: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    input_dim: usize,
    layers: Vec<Layer>,
    shapes: Vec<TensorShape>,
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.shapes.iter().map(TensorShape::numel).sum()
    }

    pub fn shapes(&self) -> &[TensorShape] {
        &self.shapes
    }

    fn output_dim(&self) -> usize {
        self.layers.last().map_or(1, |l| l.fan_out)
    }

    /// Wraps raw values in this model's layout.
    pub fn params_from(&self, values: Vec<f64>) -> Result<ParamState> {
        ParamState::new(values, self.shapes.clone())
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(&self, seed: u64) -> ParamState {
        let mut rng = seeded_rng(seed, STREAM_INIT);
        let mut values = vec![0.0; self.param_count()];
        if self.layers.is_empty() {
            let bound = 1.0 / libm::sqrt(self.input_dim as f64);
            for v in &mut values {
                *v = rng.random_range(-bound..bound);
            }
        } else {
            for layer in &self.layers {
                let bound = 1.0 / libm::sqrt(layer.fan_in as f64);
                for v in &mut values[layer.weight..layer.bias] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        ParamState::new(values, self.shapes.clone()).expect("layout matches shapes")
    }

    fn check(&self, theta: &[f64], batch: &Batch<'_>) -> Result<()> {
        Error::check_len("model parameters", self.param_count(), theta.len())?;
        Error::check_len("batch features", self.input_dim, batch.dim())?;
        if batch.is_empty() {
            return Err(Error::Empty);
        }
        if self.spec.kind == ModelKind::LogisticRegression && !batch.is_classification() {
            return Err(Error::config("logistic regression needs a classification dataset"));
        }
        if self.spec.kind == ModelKind::Mlp && self.output_dim() >= 2 {
            let k = self.output_dim() as f64;
            if batch.samples().any(|(_, y)| !(y >= 0.0 && y < k && libm::trunc(y) == y)) {
                return Err(Error::config("mlp class targets must be integers below the output width"));
            }
        }
        Ok(())
    }

    /// Mean per-sample loss plus `½ · l2 · ‖θ‖²`.
    pub fn loss(&self, theta: &[f64], batch: &Batch<'_>) -> Result<f64> {
        self.check(theta, batch)?;
        self.objective(theta, batch, None)
    }

    /// Loss and its exact gradient.
    pub fn loss_and_grad(&self, params: &ParamState, batch: &Batch<'_>) -> Result<(f64, Vec<f64>)> {
        let theta = params.values();
        self.check(theta, batch)?;
        let mut grad = vec![0.0; theta.len()];
        let loss = self.objective(theta, batch, Some(&mut grad))?;
        Ok((loss, grad))
    }

    fn objective(&self, theta: &[f64], batch: &Batch<'_>, mut grad: Option<&mut Vec<f64>>) -> Result<f64> {
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut scratch = Scratch::new(&self.layers);
        for (x, y) in batch.samples() {
            let sample_loss = match self.spec.kind {
                ModelKind::LinearRegression => {
                    let r = dot(theta, x) - y;
                    if let Some(g) = grad.as_deref_mut() {
                        axpy(g, r / n, x);
                    }
                    0.5 * r * r
                }
                ModelKind::LogisticRegression => {
                    let z = dot(theta, x);
                    if let Some(g) = grad.as_deref_mut() {
                        axpy(g, (sigmoid(z) - y) / n, x);
                    }
                    softplus(z) - y * z
                }
                ModelKind::Mlp => self.mlp_sample(theta, x, y, &mut scratch, grad.as_deref_mut(), n),
            };
            if !sample_loss.is_finite() {
                return Err(Error::NonFinite { context: "sample loss" });
            }
            total += sample_loss;
        }
        let mut loss = total / n;
        if self.spec.l2 > 0.0 {
            let sq: f64 = theta.iter().map(|t| t * t).sum();
            loss += 0.5 * self.spec.l2 * sq;
            if let Some(g) = grad.as_deref_mut() {
                axpy(g, self.spec.l2, theta);
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: "loss" });
        }
        if let Some(g) = grad {
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { context: "gradient" });
            }
        }
        Ok(loss)
    }

    fn forward(&self, theta: &[f64], x: &[f64], s: &mut Scratch) {
        s.acts[0].clear();
        s.acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = s.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            let pre = &mut s.pre[l];
            for o in 0..layer.fan_out {
                let row = &theta[layer.weight + o * layer.fan_in..layer.weight + (o + 1) * layer.fan_in];
                let z = dot(row, input) + theta[layer.bias + o];
                pre[o] = z;
                out[o] = if l == last { z } else { self.spec.activation.apply(z) };
            }
        }
    }

    fn mlp_sample(
        &self,
        theta: &[f64],
        x: &[f64],
        y: f64,
        s: &mut Scratch,
        grad: Option<&mut Vec<f64>>,
        n: f64,
    ) -> f64 {
        self.forward(theta, x, s);
        let out = &s.acts[self.layers.len()];
        let delta = &mut s.delta[self.layers.len() - 1];
        let loss = if out.len() == 1 {
            let r = out[0] - y;
            delta[0] = r;
            0.5 * r * r
        } else {
            let class = y as usize;
            let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = out.iter().map(|o| libm::exp(o - max)).sum();
            let lse = max + libm::log(sum);
            for (d, o) in delta.iter_mut().zip(out.iter()) {
                *d = libm::exp(o - lse);
            }
            delta[class] -= 1.0;
            lse - out[class]
        };
        let Some(grad) = grad else {
            return loss;
        };
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let (lower, upper) = s.delta.split_at_mut(l);
            let delta = &upper[0];
            let input = &s.acts[l];
            for o in 0..layer.fan_out {
                let d = delta[o] / n;
                grad[layer.bias + o] += d;
                let row = layer.weight + o * layer.fan_in;
                axpy(&mut grad[row..row + layer.fan_in], d, input);
            }
            if l > 0 {
                let prev = &mut lower[l - 1];
                for (i, p) in prev.iter_mut().enumerate() {
                    let back: f64 = (0..layer.fan_out)
                        .map(|o| theta[layer.weight + o * layer.fan_in + i] * delta[o])
                        .sum();
                    *p = back * self.spec.activation.derivative(s.pre[l - 1][i], s.acts[l][i]);
                }
            }
        }
        loss
    }

    /// Accuracy on classification data, mean squared error otherwise.
    pub fn evaluate(&self, params: &ParamState, data: &Dataset) -> Result<f64> {
        let theta = params.values();
        let batch = data.full();
        self.check(theta, &batch)?;
        let mut scratch = Scratch::new(&self.layers);
        let mut acc = 0.0;
        for (x, y) in batch.samples() {
            let out = self.predict_raw(theta, x, &mut scratch);
            if !out.iter().all(|o| o.is_finite()) {
                return Err(Error::NonFinite { context: "model output" });
            }
            if data.is_classification() {
                let class = match (self.spec.kind, out.len()) {
                    (ModelKind::LogisticRegression, _) => (out[0] > 0.0) as usize,
                    (_, 1) => (out[0] > 0.5) as usize,
                    _ => argmax(out),
                };
                if class as f64 == y {
                    acc += 1.0;
                }
            } else {
                let r = out[0] - y;
                acc += r * r;
            }
        }
        Ok(acc / data.len() as f64)
    }

    fn predict_raw<'s>(&self, theta: &[f64], x: &[f64], s: &'s mut Scratch) -> &'s [f64] {
        if self.layers.is_empty() {
            s.linear_out[0] = dot(theta, x);
            &s.linear_out
        } else {
            self.forward(theta, x, s);
            &s.acts[self.layers.len()]
        }
    }
}

struct Scratch {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    linear_out: [f64; 1],
}

impl Scratch {
    fn new(layers: &[Layer]) -> Self {
        let mut acts = Vec::with_capacity(layers.len() + 1);
        if let Some(first) = layers.first() {
            acts.push(vec![0.0; first.fan_in]);
        }
        acts.extend(layers.iter().map(|l| vec![0.0; l.fan_out]));
        Self {
            acts,
            pre: layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            delta: layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            linear_out: [0.0],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
