//! A small differentiable MLP: dense layers with relu or identity
//! activations, exact reverse-mode gradients for parameters and inputs,
//! and plain SGD with weight decay. No convolutions, no GPU; just enough
//! network to train on desk-scale data and to give attacks an input
//! gradient.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One dense layer: `rows x cols` weight matrix (row-major), bias, activation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classifier {
    pub input_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<Layer>,
}

/// A labeled minibatch. Inputs are clamped into [0,1] at construction.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("batch must be nonempty".into()));
        }
        if inputs.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let inputs = inputs
            .into_iter()
            .map(|x| x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
            .collect();
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Parameter and input gradients, shapes mirroring their sources.
#[derive(Debug, Clone)]
pub struct GradientTape {
    pub weight_grads: Vec<Vec<f64>>,
    pub bias_grads: Vec<Vec<f64>>,
    pub input_grads: Vec<Vec<f64>>,
}

impl GradientTape {
    pub fn zeros_like(model: &Classifier, batch_size: usize) -> Self {
        Self {
            weight_grads: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias_grads: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            input_grads: vec![vec![0.0; model.input_dim]; batch_size],
        }
    }

    /// Elementwise sum of two tapes from the same model and batch size.
    pub fn add(&mut self, other: &GradientTape) {
        for (a, b) in self.weight_grads.iter_mut().zip(&other.weight_grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.bias_grads.iter_mut().zip(&other.bias_grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.input_grads.iter_mut().zip(&other.input_grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

impl Classifier {
    /// MLP with relu hidden layers and an identity output layer,
    /// He-initialized from the seed.
    pub fn mlp(input_dim: usize, hidden: &[usize], num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut fan_in = input_dim;
        for (idx, &width) in hidden.iter().chain(std::iter::once(&num_classes)).enumerate() {
            let is_last = idx == hidden.len();
            let scale = (2.0 / fan_in as f64).sqrt();
            let weights = (0..width * fan_in)
                .map(|_| {
                    // Box-Muller from two uniforms keeps the byte stream
                    // stable across rand versions.
                    let u1: f64 = rng.gen::<f64>().max(1e-12);
                    let u2: f64 = rng.gen();
                    scale * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect();
            layers.push(Layer {
                rows: width,
                cols: fan_in,
                weights,
                bias: vec![0.0; width],
                activation: if is_last { Activation::Identity } else { Activation::Relu },
            });
            fan_in = width;
        }
        Self { input_dim, num_classes, layers }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let mut dim = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.cols != dim || l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::InvalidInput(format!("layer {i} shapes do not compose")));
            }
            dim = l.rows;
        }
        if dim != self.num_classes {
            return Err(Error::InvalidInput(format!(
                "final layer outputs {dim}, expected {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Logits for a batch of inputs; no softmax.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut cache = self.forward_cached(inputs)?;
        Ok(cache.activations.pop().expect("forward produces at least the input layer"))
    }

    fn forward_cached(&self, inputs: &[Vec<f64>]) -> Result<ForwardCache> {
        for x in inputs {
            if x.len() != self.input_dim {
                return Err(Error::InvalidInput(format!(
                    "input has dimension {}, model expects {}",
                    x.len(),
                    self.input_dim
                )));
            }
        }
        // activations[0] is the input; activations[l+1] the output of layer l.
        let mut activations = vec![inputs.to_vec()];
        let mut pre = Vec::new();
        for layer in &self.layers {
            let prev = activations.last().unwrap();
            let mut z_batch = Vec::with_capacity(prev.len());
            let mut a_batch = Vec::with_capacity(prev.len());
            for x in prev {
                let mut z = layer.bias.clone();
                for r in 0..layer.rows {
                    let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                    z[r] += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                }
                let a = match layer.activation {
                    Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
                    Activation::Identity => z.clone(),
                };
                z_batch.push(z);
                a_batch.push(a);
            }
            pre.push(z_batch);
            activations.push(a_batch);
        }
        Ok(ForwardCache { activations, pre })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let logits = self.forward(std::slice::from_ref(&x.to_vec()))?;
        Ok(argmax(&logits[0]))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("classifier serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let model: Classifier = serde_json::from_value(v.clone())
            .map_err(|e| Error::Format(format!("bad checkpoint: {e}")))?;
        model.check_shapes()?;
        Ok(model)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

struct ForwardCache {
    activations: Vec<Vec<Vec<f64>>>,
    pre: Vec<Vec<Vec<f64>>>,
}

/// Mean cross entropy of logits against integer labels, with
/// max-subtraction for stability.
pub fn cross_entropy(logits: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    validate_labels(logits, labels)?;
    let mut total = 0.0;
    for (row, &y) in logits.iter().zip(labels) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    Ok(total / logits.len() as f64)
}

/// Gradient of mean cross entropy with respect to the logits:
/// (softmax - onehot) / B.
pub fn cross_entropy_logit_grad(logits: &[Vec<f64>], labels: &[usize]) -> Result<Vec<Vec<f64>>> {
    validate_labels(logits, labels)?;
    let b = logits.len() as f64;
    let mut grads = Vec::with_capacity(logits.len());
    for (row, &y) in logits.iter().zip(labels) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let mut g: Vec<f64> = exps.iter().map(|e| e / z / b).collect();
        g[y] -= 1.0 / b;
        grads.push(g);
    }
    Ok(grads)
}

fn validate_labels(logits: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if logits.len() != labels.len() {
        return Err(Error::InvalidInput("logit/label count mismatch".into()));
    }
    for (row, &y) in logits.iter().zip(labels) {
        if y >= row.len() {
            return Err(Error::InvalidInput(format!("label {y} out of range {}", row.len())));
        }
    }
    Ok(())
}

/// Reverse-mode pass: given d(loss)/d(logits), return exact gradients for
/// every parameter and every input coordinate.
pub fn backward(
    model: &Classifier,
    inputs: &[Vec<f64>],
    logit_grads: &[Vec<f64>],
) -> Result<GradientTape> {
    let cache = model.forward_cached(inputs)?;
    if logit_grads.len() != inputs.len()
        || logit_grads.iter().any(|g| g.len() != model.num_classes)
    {
        return Err(Error::InvalidInput("logit gradient shape mismatch".into()));
    }
    let mut tape = GradientTape::zeros_like(model, inputs.len());
    for s in 0..inputs.len() {
        let mut delta = logit_grads[s].clone();
        for (l, layer) in model.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                for (d, z) in delta.iter_mut().zip(&cache.pre[l][s]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let prev = &cache.activations[l][s];
            for r in 0..layer.rows {
                tape.bias_grads[l][r] += delta[r];
                let wrow = &mut tape.weight_grads[l][r * layer.cols..(r + 1) * layer.cols];
                for c in 0..layer.cols {
                    wrow[c] += delta[r] * prev[c];
                }
            }
            let mut next_delta = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let wrow = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                for c in 0..layer.cols {
                    next_delta[c] += wrow[c] * delta[r];
                }
            }
            delta = next_delta;
        }
        tape.input_grads[s] = delta;
    }
    Ok(tape)
}

/// Convenience: backward pass of mean cross entropy, optionally with an
/// extra externally supplied gradient on the logits (alignment terms).
pub fn backward_ce(
    model: &Classifier,
    batch: &Batch,
    extra_logit_grad: Option<&[Vec<f64>]>,
) -> Result<GradientTape> {
    let logits = model.forward(&batch.inputs)?;
    let mut dlogits = cross_entropy_logit_grad(&logits, &batch.labels)?;
    if let Some(extra) = extra_logit_grad {
        if extra.len() != dlogits.len() || extra.iter().any(|g| g.len() != model.num_classes) {
            return Err(Error::InvalidInput("external logit gradient shape mismatch".into()));
        }
        for (d, e) in dlogits.iter_mut().zip(extra) {
            for (x, y) in d.iter_mut().zip(e) {
                *x += y;
            }
        }
    }
    backward(model, &batch.inputs, &dlogits)
}

/// In-place SGD update: p <- p - lr * (grad + weight_decay * p).
pub fn sgd_step(
    model: &mut Classifier,
    tape: &GradientTape,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !(lr > 0.0) || weight_decay < 0.0 {
        return Err(Error::InvalidInput("lr must be > 0 and weight_decay >= 0".into()));
    }
    for (l, layer) in model.layers.iter_mut().enumerate() {
        let wg = &tape.weight_grads[l];
        let bg = &tape.bias_grads[l];
        if wg.iter().chain(bg).any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite gradient in layer {l}")));
        }
        for (w, g) in layer.weights.iter_mut().zip(wg) {
            *w -= lr * (g + weight_decay * *w);
        }
        for (b, g) in layer.bias.iter_mut().zip(bg) {
            *b -= lr * (g + weight_decay * *b);
        }
        if layer.weights.iter().chain(&layer.bias).any(|p| !p.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite parameter in layer {l} after update"
            )));
        }
    }
    Ok(())
}
