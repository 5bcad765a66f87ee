//! Head-body post-process.
//!
//! 1. Every post-NMS head is matched against post-NMS bodies (IoH above
//!    `lambda`) and each pair is scored by the relationship discriminator.
//!    Heads whose best score falls below `beta1`, or that match no body, are
//!    *mismatched*.
//! 2. Each mismatched head is matched again, this time against the bodies
//!    before NMS. A best score above `beta2` recalls the best-scoring body; a
//!    best score below `beta1` (or no match at all) removes the head as a
//!    false positive. Anything in `[beta1, beta2]` leaves both sets alone.
//!
//! Decisions for one head depend only on the immutable inputs, so the
//! outcome does not depend on the order of the heads.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::{check_subset, Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::geometry::ioh;
use crate::nms::{nms, score_order, NmsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostProcessConfig {
    /// IoH a head must exceed to be paired with a body.
    pub lambda: f64,
    /// Low relationship score threshold.
    pub beta1: f64,
    /// High relationship score threshold.
    pub beta2: f64,
}

impl Default for PostProcessConfig {
    fn default() -> Self {
        Self { lambda: 0.7, beta1: 0.1, beta2: 0.9 }
    }
}

impl PostProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid("postprocess.lambda", "must lie in (0, 1)"));
        }
        if !(0.0 <= self.beta1 && self.beta1 < self.beta2 && self.beta2 <= 1.0) {
            return Err(Error::invalid("postprocess.beta1", "need 0 <= beta1 < beta2 <= 1"));
        }
        Ok(())
    }
}

/// Scores whether a head and a body belong to the same person.
pub trait PairScorer {
    fn score(&self, head: &Detection, body: &Detection) -> Result<f64>;
}

impl<F> PairScorer for F
where
    F: Fn(&Detection, &Detection) -> f64,
{
    fn score(&self, head: &Detection, body: &Detection) -> Result<f64> {
        Ok(self(head, body))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogEntry {
    pub head_id: u64,
    pub body_id: u64,
    pub rdm_score: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutput {
    pub final_heads: Vec<Detection>,
    pub final_bodies: Vec<Detection>,
    pub recalled_body_ids: Vec<u64>,
    pub removed_head_ids: Vec<u64>,
    pub pair_log: Vec<PairLogEntry>,
}

/// All `(head index, body index)` pairs with `IoH(head, body) > lambda`.
///
/// Fails when a head has zero area.
pub fn match_pairs(heads: &[Detection], bodies: &[Detection], lambda: f64) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (hi, h) in heads.iter().enumerate() {
        for (bi, b) in bodies.iter().enumerate() {
            if ioh(&h.bbox, &b.bbox)? > lambda {
                pairs.push((hi, bi));
            }
        }
    }
    Ok(pairs)
}

/// Best-scoring partner of `head` among `bodies`, or `None` when no body
/// passes the IoH gate. Ties in relationship score go to the higher detector
/// score, then to the lower id.
fn best_partner<S: PairScorer + ?Sized>(
    head: &Detection,
    bodies: &[Detection],
    scorer: &S,
    lambda: f64,
    phase: Phase,
    log: &mut Vec<PairLogEntry>,
) -> Result<Option<(f64, usize)>> {
    let mut best: Option<(f64, usize)> = None;
    for (bi, body) in bodies.iter().enumerate() {
        if ioh(&head.bbox, &body.bbox)? <= lambda {
            continue;
        }
        let s = scorer.score(head, body)?;
        if !s.is_finite() {
            return Err(Error::invalid("rdm_score", alloc::format!("non-finite score {s}")));
        }
        log.push(PairLogEntry { head_id: head.id, body_id: body.id, rdm_score: s, phase });
        let better = match best {
            None => true,
            Some((bs, bj)) => match s.total_cmp(&bs) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => score_order(body, &bodies[bj]) == Ordering::Less,
            },
        };
        if better {
            best = Some((s, bi));
        }
    }
    Ok(best)
}

fn is_low(best: Option<(f64, usize)>, beta1: f64) -> bool {
    match best {
        None => true,
        Some((s, _)) => s < beta1,
    }
}

/// Indices into `heads` of the mismatched heads: no post-NMS body partner, or
/// a best relationship score below `beta1`.
pub fn find_mismatched_heads<S: PairScorer + ?Sized>(
    heads: &[Detection],
    bodies: &[Detection],
    scorer: &S,
    cfg: &PostProcessConfig,
) -> Result<Vec<usize>> {
    let mut log = Vec::new();
    mismatched_with_log(heads, bodies, scorer, cfg, &mut log)
}

fn mismatched_with_log<S: PairScorer + ?Sized>(
    heads: &[Detection],
    bodies: &[Detection],
    scorer: &S,
    cfg: &PostProcessConfig,
    log: &mut Vec<PairLogEntry>,
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (hi, h) in heads.iter().enumerate() {
        let best = best_partner(h, bodies, scorer, cfg.lambda, Phase::First, log)?;
        if is_low(best, cfg.beta1) {
            out.push(hi);
        }
    }
    Ok(out)
}

/// Fills the post-NMS lists from the raw detections. The pre-NMS lists keep
/// only what entered NMS (score at or above the floor), so B2 ⊆ B1 holds.
pub fn apply_nms(raw: &DetectionSet, cfg: &NmsConfig) -> Result<DetectionSet> {
    cfg.validate()?;
    let heads = nms(&raw.heads_pre_nms, cfg);
    let bodies = nms(&raw.bodies_pre_nms, cfg);
    Ok(DetectionSet {
        scene_id: raw.scene_id.clone(),
        heads_pre_nms: heads.candidates,
        heads: heads.kept,
        bodies_pre_nms: bodies.candidates,
        bodies: bodies.kept,
    })
}

/// Runs the full post-process on one scene.
///
/// `heads` is H (after NMS), `bodies_pre_nms` is B1 and `bodies` is B2.
/// Recalled bodies keep their detector score and are appended after B2 in
/// descending score order.
pub fn postprocess<S: PairScorer + ?Sized>(
    heads: &[Detection],
    bodies_pre_nms: &[Detection],
    bodies: &[Detection],
    scorer: &S,
    cfg: &PostProcessConfig,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    check_subset(bodies_pre_nms, bodies)?;

    let mut pair_log = Vec::new();
    let mismatched = mismatched_with_log(heads, bodies, scorer, cfg, &mut pair_log)?;

    let mut present: BTreeSet<u64> = bodies.iter().map(|b| b.id).collect();
    let mut recalled: Vec<Detection> = Vec::new();
    let mut removed: BTreeSet<u64> = BTreeSet::new();

    for &hi in &mismatched {
        let head = &heads[hi];
        let best = best_partner(head, bodies_pre_nms, scorer, cfg.lambda, Phase::Second, &mut pair_log)?;
        match best {
            Some((s, bi)) if s > cfg.beta2 => {
                let body = bodies_pre_nms[bi];
                if present.insert(body.id) {
                    recalled.push(body);
                }
            }
            _ if is_low(best, cfg.beta1) => {
                removed.insert(head.id);
            }
            _ => {}
        }
    }

    recalled.sort_by(score_order);
    let final_heads: Vec<Detection> = heads.iter().filter(|h| !removed.contains(&h.id)).copied().collect();
    let removed_head_ids = heads.iter().map(|h| h.id).filter(|id| removed.contains(id)).collect();
    let recalled_body_ids = recalled.iter().map(|b| b.id).collect();
    let mut final_bodies = bodies.to_vec();
    final_bodies.extend(recalled);

    Ok(PipelineOutput { final_heads, final_bodies, recalled_body_ids, removed_head_ids, pair_log })
}
