//! Log-average miss rate over false positives per image.
//!
//! Detections are matched greedily in score order to the unmatched,
//! non-ignored ground truth of highest IoU. A detection that only overlaps an
//! ignored person counts as neither a true nor a false positive. Sweeping the
//! score threshold yields a miss-rate/FPPI curve, which is sampled at nine
//! log-spaced FPPI points in `[1e-2, 1]`; MR⁻² is the geometric mean of those
//! samples.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Class, Detection, PersonInstance, Scene};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::nms::score_order;

/// Floor applied to miss rates before taking logs.
pub const MISS_RATE_FLOOR: f64 = 1e-10;

/// `10^(-2 + k/4)` for `k = 0..=8`.
pub fn default_fppi_points() -> Vec<f64> {
    (0..=8).map(|k| libm::pow(10.0, -2.0 + k as f64 / 4.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_match_threshold: f64,
    pub fppi_points: Vec<f64>,
    pub reasonable_min_height: f64,
    pub reasonable_max_occlusion: f64,
    pub class_under_test: Class,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_match_threshold: 0.5,
            fppi_points: default_fppi_points(),
            reasonable_min_height: 50.0,
            reasonable_max_occlusion: 0.35,
            class_under_test: Class::Body,
        }
    }
}

impl EvalConfig {
    pub fn for_class(class: Class) -> Self {
        Self { class_under_test: class, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.iou_match_threshold > 0.0 && self.iou_match_threshold <= 1.0) {
            return Err(Error::invalid("eval.iou_match_threshold", "must lie in (0, 1]"));
        }
        if self.fppi_points.is_empty()
            || self.fppi_points.iter().any(|p| !(p.is_finite() && *p > 0.0))
            || self.fppi_points.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid("eval.fppi_points", "must be positive and strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    #[serde(rename = "tp")]
    TruePositive,
    #[serde(rename = "fp")]
    FalsePositive,
    Ignored,
}

/// A ground-truth box as seen by the matcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub ignore: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Detections scoring at least this are counted.
    pub threshold: f64,
    pub fppi: f64,
    pub miss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mr2: f64,
    pub curve: Vec<CurvePoint>,
    /// Miss rate sampled at each reference FPPI point.
    pub sampled: Vec<(f64, f64)>,
    pub num_gt: usize,
    pub num_images: usize,
}

/// Marks persons outside the Reasonable subset as ignored: body shorter
/// than the minimum height, or occlusion at or above the maximum. Persons are
/// never deleted, so detections on them stay neutral.
pub fn reasonable_filter(scene: &Scene, cfg: &EvalConfig) -> Scene {
    let mut out = scene.clone();
    for p in &mut out.persons {
        if p.body.height() < cfg.reasonable_min_height || p.occlusion_ratio >= cfg.reasonable_max_occlusion {
            p.ignore = true;
        }
    }
    out
}

/// Greedy matching of one image's detections, which must already be sorted
/// by descending score. Each non-ignored ground truth absorbs at most one
/// detection; ignored ground truth absorbs any number.
pub fn match_to_gt(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> Vec<Outcome> {
    let mut taken = vec![false; gts.len()];
    dets.iter()
        .map(|d| {
            let mut best: Option<(f64, usize)> = None;
            let mut hits_ignored = false;
            for (g, gt) in gts.iter().enumerate() {
                let v = iou(&d.bbox, &gt.bbox);
                if v < iou_threshold {
                    continue;
                }
                if gt.ignore {
                    hits_ignored = true;
                } else if !taken[g] && best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, g));
                }
            }
            match best {
                Some((_, g)) => {
                    taken[g] = true;
                    Outcome::TruePositive
                }
                None if hits_ignored => Outcome::Ignored,
                None => Outcome::FalsePositive,
            }
        })
        .collect()
}

fn gt_box(p: &PersonInstance, class: Class) -> BBox {
    match class {
        Class::Head => p.head,
        Class::Body => p.body,
    }
}

/// Ground truth of one filtered scene for the class under test.
pub fn ground_truth(scene: &Scene, cfg: &EvalConfig) -> Vec<GroundTruth> {
    reasonable_filter(scene, cfg)
        .persons
        .iter()
        .map(|p| GroundTruth { bbox: gt_box(p, cfg.class_under_test), ignore: p.ignore })
        .collect()
}

/// MR⁻² of `detections` (scene id, detections of the class under test)
/// against `scenes`. Scenes without an entry contribute zero detections.
pub fn compute_mr2(scenes: &[Scene], detections: &[(&str, &[Detection])], cfg: &EvalConfig) -> Result<EvalResult> {
    cfg.validate()?;
    let mut by_scene: BTreeMap<&str, &[Detection]> = BTreeMap::new();
    for &(id, dets) in detections {
        if by_scene.insert(id, dets).is_some() {
            return Err(Error::Invariant(format!("detections for scene {id:?} given twice")));
        }
    }
    for id in by_scene.keys() {
        if !scenes.iter().any(|s| s.scene_id == *id) {
            return Err(Error::Invariant(format!("detections reference unknown scene {id:?}")));
        }
    }

    let mut num_gt = 0usize;
    let mut scored: Vec<(f64, Outcome)> = Vec::new();
    for scene in scenes {
        let gts = ground_truth(scene, cfg);
        num_gt += gts.iter().filter(|g| !g.ignore).count();
        let mut dets: Vec<Detection> = by_scene.get(scene.scene_id.as_str()).map_or(Vec::new(), |d| d.to_vec());
        if let Some(d) = dets.iter().find(|d| d.class != cfg.class_under_test) {
            return Err(Error::invalid(
                "class",
                format!(
                    "scene {:?} has a {} detection while evaluating {}",
                    scene.scene_id, d.class, cfg.class_under_test
                ),
            ));
        }
        dets.sort_by(score_order);
        let outcomes = match_to_gt(&dets, &gts, cfg.iou_match_threshold);
        scored.extend(dets.iter().map(|d| d.score).zip(outcomes));
    }
    if num_gt == 0 {
        return Err(Error::Empty("non-ignored ground truth after Reasonable filtering"));
    }

    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let num_images = scenes.len();
    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            match scored[i].1 {
                Outcome::TruePositive => tp += 1,
                Outcome::FalsePositive => fp += 1,
                Outcome::Ignored => {}
            }
            i += 1;
        }
        curve.push(CurvePoint {
            threshold,
            fppi: fp as f64 / num_images as f64,
            miss_rate: 1.0 - tp as f64 / num_gt as f64,
        });
    }

    let sampled = sample_curve(&curve, &cfg.fppi_points);
    let mr2 = log_average(sampled.iter().map(|&(_, m)| m));
    Ok(EvalResult { mr2, curve, sampled, num_gt, num_images })
}

/// For each reference point, the lowest miss rate among curve points whose
/// FPPI does not exceed it; 1.0 when there is none.
pub fn sample_curve(curve: &[CurvePoint], points: &[f64]) -> Vec<(f64, f64)> {
    points
        .iter()
        .map(|&r| {
            let m = curve.iter().filter(|c| c.fppi <= r).map(|c| c.miss_rate).fold(1.0, f64::min);
            (r, m)
        })
        .collect()
}

/// Geometric mean with [`MISS_RATE_FLOOR`]; exactly 0 when every sample is 0.
pub fn log_average(miss_rates: impl Iterator<Item = f64> + Clone) -> f64 {
    if miss_rates.clone().all(|m| m == 0.0) {
        return 0.0;
    }
    let (sum, n) = miss_rates.fold((0.0, 0usize), |(s, n), m| (s + libm::log(m.max(MISS_RATE_FLOOR)), n + 1));
    libm::exp(sum / n as f64)
}
