use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::features::FeatureExtractor;
use super::train::LabeledPair;
use crate::data::{Detection, DetectionSet, PersonInstance, Scene};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::pipeline::match_pairs;

/// IoU needed for a detection to be attributed to a ground-truth person.
pub const ASSIGN_IOU: f64 = 0.5;

/// Attributes each detection to the person whose box (selected by `gt_box`)
/// it overlaps most, provided the IoU reaches `min_iou`. Several detections
/// may be attributed to one person; ties go to the lower person id.
pub fn assign_to_persons(
    dets: &[Detection],
    persons: &[PersonInstance],
    gt_box: fn(&PersonInstance) -> &BBox,
    min_iou: f64,
) -> Vec<Option<u64>> {
    dets.iter()
        .map(|d| {
            let mut best: Option<(f64, u64)> = None;
            for p in persons {
                let v = iou(&d.bbox, gt_box(p));
                if v < min_iou {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bv, bid)) => v > bv || (v == bv && p.person_id < bid),
                };
                if better {
                    best = Some((v, p.person_id));
                }
            }
            best.map(|(_, id)| id)
        })
        .collect()
}

/// Labeled pairs for RDM training.
///
/// Pairs are post-NMS heads against pre-NMS bodies with IoH above `lambda`,
/// the same gating the post-process applies. A pair is positive iff head and
/// body are attributed to the same person.
pub fn build_training_pairs<E: FeatureExtractor>(
    scenes: &[Scene],
    sets: &[DetectionSet],
    lambda: f64,
    extractor: &E,
) -> Result<Vec<LabeledPair>> {
    let by_id: BTreeMap<&str, &Scene> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let mut out = Vec::new();
    for set in sets {
        let scene = by_id
            .get(set.scene_id.as_str())
            .ok_or_else(|| Error::Invariant(format!("detections reference unknown scene {:?}", set.scene_id)))?;
        let head_owner = assign_to_persons(&set.heads, &scene.persons, |p| &p.head, ASSIGN_IOU);
        let body_owner = assign_to_persons(&set.bodies_pre_nms, &scene.persons, |p| &p.body, ASSIGN_IOU);
        for (hi, bi) in match_pairs(&set.heads, &set.bodies_pre_nms, lambda)? {
            let label = matches!(
                (head_owner[hi], body_owner[bi]),
                (Some(a), Some(b)) if a == b
            );
            let features = extractor.extract(&set.heads[hi], &set.bodies_pre_nms[bi])?;
            out.push(LabeledPair { features, label });
        }
    }
    Ok(out)
}
