use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{RelationModel, DEFAULT_HIDDEN};
use crate::error::{Error, Result};

/// A feature vector with its same-person label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub features: Vec<f64>,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Positives per `positive_ratio + negative_ratio` batch samples.
    pub positive_ratio: u32,
    pub negative_ratio: u32,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            positive_ratio: 1,
            negative_ratio: 3,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 30,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid("train.batch_size", "must be at least 2"));
        }
        if self.positive_ratio == 0 || self.negative_ratio == 0 {
            return Err(Error::invalid("train.positive_ratio", "ratios must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("train.learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("train.momentum", "must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("train.weight_decay", "must be non-negative"));
        }
        if self.epochs == 0 || self.hidden == 0 {
            return Err(Error::invalid("train.epochs", "epochs and hidden width must be positive"));
        }
        Ok(())
    }

    /// `(positives, negatives)` drawn for every batch.
    pub fn batch_split(&self) -> (usize, usize) {
        let total = (self.positive_ratio + self.negative_ratio) as usize;
        let pos = (self.batch_size * self.positive_ratio as usize / total).max(1);
        (pos, (self.batch_size - pos).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: RelationModel,
    /// Mean BCE over the full training set at the end of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Draws class-balanced batches. Each class is walked in a shuffled order and
/// reshuffled when exhausted, so a scarce class is resampled across passes.
#[derive(Debug, Clone)]
pub struct BalancedSampler {
    pools: [ClassPool; 2],
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
struct ClassPool {
    order: Vec<usize>,
    cursor: usize,
}

impl BalancedSampler {
    pub fn new(positives: Vec<usize>, negatives: Vec<usize>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pools = [ClassPool { order: positives, cursor: 0 }, ClassPool { order: negatives, cursor: 0 }];
        for p in &mut pools {
            p.order.shuffle(&mut rng);
        }
        Self { pools, rng }
    }

    /// Indices of `pos` positives followed by `neg` negatives.
    pub fn next_batch(&mut self, pos: usize, neg: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(pos + neg);
        for (class, count) in [(0, pos), (1, neg)] {
            let pool = &mut self.pools[class];
            for _ in 0..count {
                if pool.cursor == pool.order.len() {
                    pool.order.shuffle(&mut self.rng);
                    pool.cursor = 0;
                }
                batch.push(pool.order[pool.cursor]);
                pool.cursor += 1;
            }
        }
        batch
    }
}

/// Minibatch SGD with momentum and weight decay on binary cross-entropy.
///
/// Every batch holds `cfg.batch_split()` positives and negatives. An epoch is
/// `ceil(len / batch_size)` batches.
pub fn train(pairs: &[LabeledPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dim = match pairs.first() {
        Some(p) => p.features.len(),
        None => return Err(Error::Empty("training pairs")),
    };
    if dim == 0 || pairs.iter().any(|p| p.features.len() != dim) {
        return Err(Error::invalid("features", "all pairs need the same non-zero width"));
    }
    if pairs.iter().any(|p| p.features.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("features", "non-finite feature value"));
    }
    let (positives, negatives): (Vec<usize>, Vec<usize>) = (0..pairs.len()).partition(|&i| pairs[i].label);
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("labels", "training needs at least one positive and one negative pair"));
    }

    let mut model = RelationModel::seeded(dim, cfg.hidden, cfg.seed);
    let mut sampler = BalancedSampler::new(positives, negatives, cfg.seed.wrapping_add(1));
    let (n_pos, n_neg) = cfg.batch_split();
    let batches = pairs.len().div_ceil(cfg.batch_size).max(1);
    let mut velocity = alloc::vec![0.0; model.param_count()];
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let label = |p: &LabeledPair| if p.label { 1.0 } else { 0.0 };

    for _ in 0..cfg.epochs {
        for _ in 0..batches {
            let idx = sampler.next_batch(n_pos, n_neg);
            let (_, grad) =
                model.loss_and_gradient(idx.iter().map(|&i| (pairs[i].features.as_slice(), label(&pairs[i]))));
            for ((p, v), g) in model.params_mut().zip(velocity.iter_mut()).zip(grad) {
                *v = cfg.momentum * *v + g + cfg.weight_decay * *p;
                *p -= cfg.learning_rate * *v;
            }
        }
        let loss = model.mean_loss(pairs.iter().map(|p| (p.features.as_slice(), label(p))));
        if !loss.is_finite() {
            return Err(Error::Invariant(alloc::format!("training diverged (loss {loss}); lower the learning rate")));
        }
        loss_trace.push(loss);
    }
    Ok(TrainOutcome { model, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_split_is_one_to_three() {
        assert_eq!(TrainConfig::default().batch_split(), (128, 384));
    }

    #[test]
    fn batches_have_exact_composition() {
        let pos: Vec<usize> = (0..300).collect();
        let neg: Vec<usize> = (300..2000).collect();
        let mut s = BalancedSampler::new(pos, neg, 3);
        for _ in 0..20 {
            let b = s.next_batch(128, 384);
            assert_eq!(b.len(), 512);
            assert_eq!(b.iter().filter(|&&i| i < 300).count(), 128);
        }
    }

    #[test]
    fn scarce_class_is_resampled() {
        let mut s = BalancedSampler::new(vec![0, 1], (2..10).collect(), 0);
        let b = s.next_batch(5, 3);
        assert!(b[..5].iter().all(|&i| i < 2));
        assert!(b[5..].iter().all(|&i| i >= 2));
    }

    #[test]
    fn one_class_input_is_an_error() {
        let pairs =
            vec![LabeledPair { features: vec![1.0], label: true }, LabeledPair { features: vec![2.0], label: true }];
        assert!(train(&pairs, &TrainConfig::default()).is_err());
        assert!(train(&[], &TrainConfig::default()).is_err());
    }
}
