use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully-connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Three stacked fully-connected layers with ReLU between them and a logistic
/// output: `σ(W3·relu(W2·relu(W1·x + b1) + b2) + b3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct RelationModel {
    layers: Vec<Dense>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    layers: Vec<Dense>,
}

impl TryFrom<RawModel> for RelationModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        RelationModel::from_layers(raw.layers)
    }
}

impl From<RelationModel> for RawModel {
    fn from(m: RelationModel) -> Self {
        RawModel { layers: m.layers }
    }
}

pub const LAYERS: usize = 3;
pub const DEFAULT_HIDDEN: usize = 64;

impl RelationModel {
    /// All-zero model; scores every input at exactly 0.5.
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self { layers: vec![Dense::zeros(input_dim, hidden), Dense::zeros(hidden, hidden), Dense::zeros(hidden, 1)] }
    }

    /// Seeded initialization, uniform in `±1/sqrt(fan_in)` for every weight
    /// and bias.
    pub fn seeded(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::zeros(input_dim, hidden);
        for layer in &mut model.layers {
            let bound = 1.0 / libm::sqrt(layer.inputs as f64);
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *p = rng.random_range(-bound..bound);
            }
        }
        model
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let model = Self { layers };
        model.validate()?;
        Ok(model)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != LAYERS {
            return Err(Error::invalid("layers", format!("expected {LAYERS} layers, found {}", self.layers.len())));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::invalid(format!("layers[{i}]"), "zero-sized layer"));
            }
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::invalid(
                    format!("layers[{i}]"),
                    "weight or bias length does not match the layer dims",
                ));
            }
            if i > 0 && l.inputs != self.layers[i - 1].outputs {
                return Err(Error::invalid(
                    format!("layers[{i}].inputs"),
                    "does not match the previous layer's outputs",
                ));
            }
            if l.weights.iter().chain(&l.bias).any(|p| !p.is_finite()) {
                return Err(Error::invalid(format!("layers[{i}]"), "non-finite parameter"));
            }
        }
        if self.layers[LAYERS - 1].outputs != 1 {
            return Err(Error::invalid("layers[2].outputs", "output layer must have width 1"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].outputs
    }

    /// Pre-sigmoid output.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut cur: Vec<f64> = x.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i + 1 < self.layers.len() {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            core::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    /// Relationship score in `(0, 1)`.
    pub fn score(&self, x: &[f64]) -> f64 {
        // The logistic saturates to exactly 0 or 1 in f64 for |z| > ~37.
        sigmoid(self.logit(x)).clamp(SCORE_EPS, 1.0 - SCORE_EPS)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Mean binary cross-entropy over a batch and its gradient with respect
    /// to every parameter, flattened in [`Self::params`] order.
    pub fn loss_and_gradient<'a, I>(&self, batch: I) -> (f64, Vec<f64>)
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut grad = vec![0.0; self.param_count()];
        let offsets = self.offsets();
        let mut total = 0.0;
        let mut n = 0usize;
        // pre-activations per layer, input to each layer
        let mut inputs: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        let mut pre: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        let mut delta = Vec::new();
        let mut back = Vec::new();

        for (x, y) in batch {
            n += 1;
            inputs[0].clear();
            inputs[0].extend_from_slice(x);
            for i in 0..self.layers.len() {
                self.layers[i].forward(&inputs[i], &mut pre[i]);
                if i + 1 < self.layers.len() {
                    inputs[i + 1].clear();
                    inputs[i + 1].extend(pre[i].iter().map(|v| v.max(0.0)));
                }
            }
            let z = pre[self.layers.len() - 1][0];
            total += bce_with_logit(z, y);

            delta.clear();
            delta.push(sigmoid(z) - y);
            for i in (0..self.layers.len()).rev() {
                let layer = &self.layers[i];
                let (w_off, b_off) = offsets[i];
                for (o, d) in delta.iter().enumerate() {
                    let row = &mut grad[w_off + o * layer.inputs..w_off + (o + 1) * layer.inputs];
                    for (g, v) in row.iter_mut().zip(&inputs[i]) {
                        *g += d * v;
                    }
                    grad[b_off + o] += d;
                }
                if i == 0 {
                    break;
                }
                back.clear();
                back.resize(layer.inputs, 0.0);
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
                // ReLU derivative of the layer below
                for (b, p) in back.iter_mut().zip(&pre[i - 1]) {
                    if *p <= 0.0 {
                        *b = 0.0;
                    }
                }
                core::mem::swap(&mut delta, &mut back);
            }
        }
        if n == 0 {
            return (0.0, grad);
        }
        let scale = 1.0 / n as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (total * scale, grad)
    }

    /// Mean BCE without gradients.
    pub fn mean_loss<'a, I>(&self, data: I) -> f64
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let (sum, n) =
            data.into_iter().fold((0.0, 0usize), |(s, n), (x, y)| (s + bce_with_logit(self.logit(x), y), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut at = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = (at, at + l.weights.len());
                at += l.param_count();
                o
            })
            .collect()
    }
}

const SCORE_EPS: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `-(y ln σ(z) + (1-y) ln(1-σ(z)))`, evaluated without forming σ(z).
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + libm::log1p(libm::exp(-z.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_scores_half() {
        let m = RelationModel::zeros(10, 64);
        assert_eq!(m.score(&[0.3; 10]), 0.5);
        assert_eq!(m.score(&[-7.0; 10]), 0.5);
    }

    #[test]
    fn seeded_is_reproducible() {
        let a = RelationModel::seeded(10, 8, 42);
        let b = RelationModel::seeded(10, 8, 42);
        let c = RelationModel::seeded(10, 8, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let x = [0.1, -0.2, 0.3, 0.0, 1.0, 0.5, 0.9, 0.8, 0.8, 0.4];
        assert_eq!(a.score(&x).to_bits(), b.score(&x).to_bits());
    }

    #[test]
    fn bce_matches_direct_formula() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-1.5, 1.0)] {
            let p = sigmoid(z);
            let direct = -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p));
            assert!((bce_with_logit(z, y) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_score_stays_open() {
        let mut m = RelationModel::zeros(1, 2);
        m.layers[2].bias[0] = 1e3;
        let s = m.score(&[0.0]);
        assert!(s < 1.0 && s > 0.9);
        m.layers[2].bias[0] = -1e3;
        let s = m.score(&[0.0]);
        assert!(s > 0.0 && s < 0.1);
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let mut m = RelationModel::zeros(3, 4);
        m.layers[1].bias.pop();
        assert!(m.validate().is_err());
        let mut m = RelationModel::zeros(3, 4);
        m.layers[0].weights[0] = f64::NAN;
        assert!(m.validate().is_err());
        let m = RelationModel::zeros(3, 4);
        assert!(RelationModel::from_layers(m.layers[..2].to_vec()).is_err());
    }
}
