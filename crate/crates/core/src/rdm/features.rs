use alloc::vec::Vec;

use crate::data::Detection;
use crate::error::{Error, Result};
use crate::geometry::{ioh, iou, BBox};

/// Width of the geometric pair feature vector.
pub const PAIR_FEATURES: usize = 10;

/// Geometric description of a head-body pair:
///
/// `[(hcx-bcx)/bw, (hcy-bcy)/bh, ln(hw/bw), ln(hh/bh), ioh, iou,
///   head_score, body_score, hw/hh, bw/bh]`
///
/// Every entry is invariant to translating or uniformly scaling both boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures(pub [f64; PAIR_FEATURES]);

impl PairFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn extract_features(head: &Detection, body: &Detection) -> Result<PairFeatures> {
    let (h, b) = (&head.bbox, &body.bbox);
    positive(h, "head")?;
    positive(b, "body")?;
    let (hcx, hcy) = h.center();
    let (bcx, bcy) = b.center();
    let (hw, hh, bw, bh) = (h.width(), h.height(), b.width(), b.height());
    Ok(PairFeatures([
        (hcx - bcx) / bw,
        (hcy - bcy) / bh,
        libm::log(hw / bw),
        libm::log(hh / bh),
        ioh(h, b)?,
        iou(h, b),
        head.score,
        body.score,
        hw / hh,
        bw / bh,
    ]))
}

fn positive(b: &BBox, which: &'static str) -> Result<()> {
    if b.width() > 0.0 && b.height() > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateBox(which))
    }
}

/// Maps a head-body pair to the fixed-width vector the relation model reads.
///
/// [`GeometricFeatures`] is the built-in extractor; features computed
/// elsewhere (for example pooled CNN activations) can be plugged in through
/// this trait as long as the width matches the model input.
pub trait FeatureExtractor {
    fn dim(&self) -> usize;
    fn extract(&self, head: &Detection, body: &Detection) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GeometricFeatures;

impl FeatureExtractor for GeometricFeatures {
    fn dim(&self) -> usize {
        PAIR_FEATURES
    }

    fn extract(&self, head: &Detection, body: &Detection) -> Result<Vec<f64>> {
        Ok(extract_features(head, body)?.0.to_vec())
    }
}
