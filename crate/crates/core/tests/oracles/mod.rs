//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the code paths it checks: boxes are rasterized
//! instead of intersected analytically, NMS repeatedly scans for the maximum,
//! the evaluator re-matches from scratch at every threshold, and the
//! post-process is a literal transcription of the set-based pseudocode.
#![allow(dead_code)]

use std::collections::BTreeSet;

use jointdet_core::data::{Class, Detection, Scene};
use jointdet_core::BBox;

/// Unit cells `[i, i+1] x [j, j+1]` covered by an integer-corner box.
fn cells(b: &BBox) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    for x in b.x_min() as i64..b.x_max() as i64 {
        for y in b.y_min() as i64..b.y_max() as i64 {
            out.insert((x, y));
        }
    }
    out
}

pub fn raster_intersection(a: &BBox, b: &BBox) -> f64 {
    let (ca, cb) = (cells(a), cells(b));
    ca.intersection(&cb).count() as f64
}

pub fn raster_iou(a: &BBox, b: &BBox) -> f64 {
    let (ca, cb) = (cells(a), cells(b));
    let inter = ca.intersection(&cb).count();
    let union = ca.union(&cb).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn raster_ioh(head: &BBox, body: &BBox) -> f64 {
    let (ch, cb) = (cells(head), cells(body));
    ch.intersection(&cb).count() as f64 / ch.len() as f64
}

fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let h = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let i = w * h;
    let u = a.width() * a.height() + b.width() * b.height() - i;
    if u <= 0.0 {
        0.0
    } else {
        i / u
    }
}

fn box_ioh(h: &BBox, b: &BBox) -> f64 {
    let w = (h.x_max().min(b.x_max()) - h.x_min().max(b.x_min())).max(0.0);
    let hh = (h.y_max().min(b.y_max()) - h.y_min().max(b.y_min())).max(0.0);
    w * hh / (h.width() * h.height())
}

/// O(n²) greedy NMS: pick the best remaining detection, drop everything it
/// overlaps beyond the threshold, repeat. Returns kept ids in pick order.
pub fn nms_reference(dets: &[Detection], iou_threshold: f64, score_floor: f64) -> Vec<u64> {
    let mut remaining: Vec<Detection> = dets.iter().filter(|d| d.score >= score_floor).copied().collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let (c, b) = (&remaining[i], &remaining[best]);
            if c.score > b.score || (c.score == b.score && c.id < b.id) {
                best = i;
            }
        }
        let pick = remaining.remove(best);
        remaining.retain(|d| box_iou(&pick.bbox, &d.bbox) <= iou_threshold);
        kept.push(pick.id);
    }
    kept
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefEval {
    pub mr2: f64,
    /// `(threshold, fppi, miss_rate)` per distinct score, descending.
    pub curve: Vec<(f64, f64, f64)>,
    pub num_gt: usize,
}

/// Brute-force MR⁻²: for every distinct score threshold, re-match only the
/// detections at or above it, image by image. Uses the same `libm`
/// transcendentals as the crate so results can be compared bit for bit.
pub fn mr2_reference(
    scenes: &[Scene],
    dets: &[(String, Vec<Detection>)],
    class: Class,
    iou_thr: f64,
    min_height: f64,
    max_occ: f64,
) -> Option<RefEval> {
    let gt_of = |s: &Scene| -> Vec<(BBox, bool)> {
        s.persons
            .iter()
            .map(|p| {
                let ignore = p.ignore || p.body.height() < min_height || p.occlusion_ratio >= max_occ;
                let b = if class == Class::Head { p.head } else { p.body };
                (b, ignore)
            })
            .collect()
    };
    let num_gt: usize = scenes.iter().map(|s| gt_of(s).iter().filter(|g| !g.1).count()).sum();
    if num_gt == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = dets.iter().flat_map(|(_, d)| d.iter().map(|x| x.score)).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    let mut curve = Vec::new();
    for &t in &thresholds {
        let (mut tp, mut fp) = (0usize, 0usize);
        for s in scenes {
            let gts = gt_of(s);
            let mut mine: Vec<Detection> = dets
                .iter()
                .filter(|(id, _)| *id == s.scene_id)
                .flat_map(|(_, d)| d.iter().copied())
                .filter(|d| d.score >= t)
                .collect();
            mine.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.id.cmp(&b.id)));
            let mut used = vec![false; gts.len()];
            for d in &mine {
                let mut best_g: Option<usize> = None;
                let mut best_v = -1.0;
                for (g, (gb, ig)) in gts.iter().enumerate() {
                    let v = box_iou(&d.bbox, gb);
                    if !ig && !used[g] && v >= iou_thr && v > best_v {
                        best_v = v;
                        best_g = Some(g);
                    }
                }
                if let Some(g) = best_g {
                    used[g] = true;
                    tp += 1;
                } else if !gts.iter().any(|(gb, ig)| *ig && box_iou(&d.bbox, gb) >= iou_thr) {
                    fp += 1;
                }
            }
        }
        curve.push((t, fp as f64 / scenes.len() as f64, 1.0 - tp as f64 / num_gt as f64));
    }

    let refs: Vec<f64> = (0..=8).map(|k| libm::pow(10.0, -2.0 + k as f64 / 4.0)).collect();
    let sampled: Vec<f64> = refs
        .iter()
        .map(|&r| {
            let mut m: f64 = 1.0;
            for &(_, f, mr) in &curve {
                if f <= r && mr < m {
                    m = mr;
                }
            }
            m
        })
        .collect();
    let mr2 = if sampled.iter().all(|&m| m == 0.0) {
        0.0
    } else {
        let mut sum = 0.0;
        for &m in &sampled {
            sum += libm::log(m.max(1e-10));
        }
        libm::exp(sum / sampled.len() as f64)
    };
    Some(RefEval { mr2, curve, num_gt })
}

/// Literal set-based transcription of the post-process. Returns
/// `(kept head ids, final body ids)`.
pub fn postprocess_reference(
    heads: &[Detection],
    b1: &[Detection],
    b2: &[Detection],
    score: &dyn Fn(&Detection, &Detection) -> f64,
    lambda: f64,
    beta1: f64,
    beta2: f64,
) -> (BTreeSet<u64>, BTreeSet<u64>) {
    let mut mismatched = Vec::new();
    for h in heads {
        let scores: Vec<f64> = b2.iter().filter(|b| box_ioh(&h.bbox, &b.bbox) > lambda).map(|b| score(h, b)).collect();
        if scores.is_empty() || scores.iter().cloned().fold(f64::MIN, f64::max) < beta1 {
            mismatched.push(*h);
        }
    }
    let mut dh: BTreeSet<u64> = heads.iter().map(|h| h.id).collect();
    let mut db: BTreeSet<u64> = b2.iter().map(|b| b.id).collect();
    for h in &mismatched {
        let scored: Vec<(f64, &Detection)> =
            b1.iter().filter(|b| box_ioh(&h.bbox, &b.bbox) > lambda).map(|b| (score(h, b), b)).collect();
        let max = scored.iter().map(|s| s.0).fold(f64::MIN, f64::max);
        if !scored.is_empty() && max > beta2 {
            let pick = scored
                .iter()
                .filter(|s| s.0 == max)
                .map(|s| s.1)
                .min_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.id.cmp(&b.id)))
                .unwrap();
            db.insert(pick.id);
        }
        if scored.is_empty() || max < beta1 {
            dh.remove(&h.id);
        }
    }
    (dh, db)
}
