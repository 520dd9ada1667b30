//! Fully connected classifiers stored as one flat parameter vector, so that
//! a gradient can be quantized or sent over the air as a single vector.
//!
//! Layer `l` occupies `W_l` (row-major, `out × in`) followed by `b_l`.
//! Hidden layers use the configured activation; the output layer is linear.
//! One output unit means a binary task: sigmoid cross-entropy on labels
//! `{0, 1}` or hinge on `{−1, +1}`. More output units mean softmax
//! cross-entropy.

use serde::{Deserialize, Serialize};

use super::{Classifier, LabeledSample};
use crate::rng::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Tanh => z.tanh(),
            Self::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Self::Tanh => 1.0 - a * a,
            Self::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    CrossEntropy,
    Hinge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Layer widths from input to output, at least two entries.
    pub layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub loss: Loss,
}

impl Architecture {
    pub fn new(layers: Vec<usize>, activation: Activation, loss: Loss) -> Result<Self> {
        let arch = Self {
            layers,
            activation,
            loss,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn logistic(features: usize) -> Self {
        Self {
            layers: vec![features, 1],
            activation: Activation::Tanh,
            loss: Loss::CrossEntropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return Err(Error::invalid(format!(
                "architecture needs at least two positive layer widths, got {:?}",
                self.layers
            )));
        }
        if self.loss == Loss::Hinge && self.outputs() != 1 {
            return Err(Error::invalid("hinge loss needs a single output unit"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layers.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedModel {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

impl FedModel {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let params = vec![0.0; arch.parameter_count()];
        Ok(Self { arch, params })
    }

    /// Weights `N(0, 1/fan_in)`, zero biases.
    pub fn random(arch: Architecture, rng: &mut RngStream) -> Result<Self> {
        arch.validate()?;
        let mut params = Vec::with_capacity(arch.parameter_count());
        for w in arch.layers.windows(2) {
            let sd = (w[0] as f64).recip().sqrt();
            params.extend((0..w[0] * w[1]).map(|_| sd * rng.standard_normal()));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.parameter_count() {
            return Err(Error::invalid(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                arch.parameter_count()
            )));
        }
        Ok(Self { arch, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Activations of every layer, input first; the last entry is the
    /// linear output.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut offset = 0;
        let last = self.arch.layers.len() - 2;
        for (l, w) in self.arch.layers.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            let input = &acts[l];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = weights[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(input)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
                        + bias[o];
                    if l == last {
                        z
                    } else {
                        self.arch.activation.apply(z)
                    }
                })
                .collect();
            acts.push(out);
            offset += n_out * (n_in + 1);
        }
        acts
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).pop().unwrap()
    }

    fn check_batch(&self, batch: &[LabeledSample]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let classes = self.arch.outputs().max(2);
        for s in batch {
            if s.features.len() != self.arch.inputs() {
                return Err(Error::invalid(format!(
                    "sample has {} features, model expects {}",
                    s.features.len(),
                    self.arch.inputs()
                )));
            }
            if s.label >= classes {
                return Err(Error::invalid(format!("label {} outside {classes} classes", s.label)));
            }
        }
        Ok(())
    }

    /// Loss of one sample and its derivative with respect to the output.
    fn loss_and_delta(&self, out: &[f64], label: usize) -> (f64, Vec<f64>) {
        if out.len() == 1 {
            let z = out[0];
            match self.arch.loss {
                Loss::CrossEntropy => {
                    let y = label as f64;
                    // softplus(z) − y·z, written to avoid overflow
                    let loss = z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
                    let p = 1.0 / (1.0 + (-z).exp());
                    (loss, vec![p - y])
                }
                Loss::Hinge => {
                    let y = if label == 1 { 1.0 } else { -1.0 };
                    if y * z < 1.0 {
                        (1.0 - y * z, vec![-y])
                    } else {
                        (0.0, vec![0.0])
                    }
                }
            }
        } else {
            let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = out.iter().map(|z| (z - m).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let loss = sum.ln() + m - out[label];
            let delta = exps
                .iter()
                .enumerate()
                .map(|(i, e)| e / sum - f64::from(i == label))
                .collect();
            (loss, delta)
        }
    }

    /// Mean loss over `batch`.
    pub fn loss(&self, batch: &[LabeledSample]) -> Result<f64> {
        self.check_batch(batch)?;
        Ok(batch
            .iter()
            .map(|s| self.loss_and_delta(&self.output(&s.features), s.label).0)
            .sum::<f64>()
            / batch.len() as f64)
    }
}

impl Classifier for FedModel {
    fn predict(&self, features: &[f64]) -> usize {
        let out = self.output(features);
        if out.len() == 1 {
            usize::from(out[0] >= 0.0)
        } else {
            out.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (i, &v)| if v > best.1 { (i, v) } else { best },
                )
                .0
        }
    }
}

/// Gradient of the mean loss over `batch` with respect to the flat parameters.
pub fn fed_local_gradient(model: &FedModel, batch: &[LabeledSample]) -> Result<Vec<f64>> {
    model.check_batch(batch)?;
    let layers = &model.arch.layers;
    let offsets: Vec<usize> = layers
        .windows(2)
        .scan(0, |acc, w| {
            let start = *acc;
            *acc += w[1] * (w[0] + 1);
            Some(start)
        })
        .collect();
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; model.parameter_count()];
    for s in batch {
        let acts = model.forward(&s.features);
        let (_, mut delta) = model.loss_and_delta(acts.last().unwrap(), s.label);
        for l in (0..layers.len() - 1).rev() {
            let (n_in, n_out) = (layers[l], layers[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o] * scale;
                grad[off + o * n_in..off + (o + 1) * n_in]
                    .iter_mut()
                    .zip(input)
                    .for_each(|(g, x)| *g += d * x);
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &model.params[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum();
                        back * model.arch.activation.derivative(input[i])
                    })
                    .collect();
            }
        }
    }
    Ok(grad)
}

/// `params ← params − lr · aggregate`.
pub fn fed_apply(model: &FedModel, aggregate: &[f64], lr: f64) -> Result<FedModel> {
    if aggregate.len() != model.parameter_count() {
        return Err(Error::invalid(format!(
            "aggregate has {} entries, model has {} parameters",
            aggregate.len(),
            model.parameter_count()
        )));
    }
    Ok(FedModel {
        arch: model.arch.clone(),
        params: model.params.iter().zip(aggregate).map(|(p, g)| p - lr * g).collect(),
    })
}
