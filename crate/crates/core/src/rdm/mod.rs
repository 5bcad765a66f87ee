//! Relationship discriminator.
//!
//! A head-body pair is turned into a fixed-width feature vector
//! ([`features`]), scored by a three-layer perceptron ([`model`]) and the
//! perceptron is fit with class-balanced minibatch SGD ([`train`]) on pairs
//! labeled against ground truth ([`pairs`]).

pub mod features;
pub mod model;
pub mod pairs;
pub mod train;

pub use features::{extract_features, FeatureExtractor, GeometricFeatures, PairFeatures, PAIR_FEATURES};
pub use model::{Dense, RelationModel};
pub use pairs::{assign_to_persons, build_training_pairs};
pub use train::{train, BalancedSampler, LabeledPair, TrainConfig, TrainOutcome};

use crate::data::Detection;
use crate::error::{Error, Result};
use crate::pipeline::PairScorer;

/// A trained model paired with the extractor that feeds it.
#[derive(Debug, Clone, Copy)]
pub struct Rdm<'m, E = GeometricFeatures> {
    model: &'m RelationModel,
    extractor: E,
}

impl<'m> Rdm<'m, GeometricFeatures> {
    pub fn new(model: &'m RelationModel) -> Result<Self> {
        Self::with_extractor(model, GeometricFeatures)
    }
}

impl<'m, E: FeatureExtractor> Rdm<'m, E> {
    pub fn with_extractor(model: &'m RelationModel, extractor: E) -> Result<Self> {
        if model.input_dim() != extractor.dim() {
            return Err(Error::invalid(
                "model",
                alloc::format!("model expects {} features, extractor yields {}", model.input_dim(), extractor.dim()),
            ));
        }
        Ok(Self { model, extractor })
    }
}

impl<E: FeatureExtractor> PairScorer for Rdm<'_, E> {
    fn score(&self, head: &Detection, body: &Detection) -> Result<f64> {
        Ok(self.model.score(&self.extractor.extract(head, body)?))
    }
}
