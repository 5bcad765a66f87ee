//! Greedy non-maximum suppression.
//!
//! The post-process needs both the surviving detections and the candidate set
//! they were selected from, so [`nms`] returns both.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::Detection;
use crate::error::{Error, Result};
use crate::geometry::iou;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmsConfig {
    /// A box is suppressed when its IoU with a kept box exceeds this value.
    pub iou_threshold: f64,
    /// Detections scoring below this are dropped before suppression.
    pub score_floor: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5, score_floor: 0.05 }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::invalid("nms.iou_threshold", "must lie in (0, 1]"));
        }
        if !(self.score_floor >= 0.0 && self.score_floor < 1.0) {
            return Err(Error::invalid("nms.score_floor", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NmsOutput {
    /// Survivors, by descending score (ties by ascending id).
    pub kept: Vec<Detection>,
    /// Every detection at or above the score floor, in input order.
    pub candidates: Vec<Detection>,
}

/// Descending score, ties broken by ascending id.
pub fn score_order(a: &Detection, b: &Detection) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

/// Greedy NMS over detections of a single class and scene.
pub fn nms(dets: &[Detection], cfg: &NmsConfig) -> NmsOutput {
    let candidates: Vec<Detection> = dets.iter().filter(|d| d.score >= cfg.score_floor).copied().collect();

    let mut order: Vec<&Detection> = candidates.iter().collect();
    order.sort_by(|a, b| score_order(a, b));

    let mut kept: Vec<Detection> = Vec::new();
    for d in order {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= cfg.iou_threshold) {
            kept.push(*d);
        }
    }
    NmsOutput { kept, candidates }
}
