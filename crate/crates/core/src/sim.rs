//! Synthetic crowds and a noisy two-class detector.
//!
//! [`generate_scene`] draws persons with log-normal body heights. With
//! probability `crowd_cluster_prob` a new person is placed beside an existing
//! one at a similar scale, which produces the heavily overlapping bodies that
//! NMS suppresses. Heads are derived from bodies through the inverse of the
//! generating [`HeadBodyRatio`], so every head lies inside its body.
//!
//! [`simulate_detector`] emits jittered head and body detections per person
//! (plus near-duplicate proposals for NMS to remove), background body false
//! positives, and head false positives at limb-like sites of real bodies:
//! lower corners, hands and knees.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{Class, Detection, DetectionSet, PersonInstance, Scene};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::ratio::HeadBodyRatio;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub width: u32,
    pub height: u32,
    /// Poisson mean of the person count.
    pub persons_per_image: f64,
    /// Probability that a person is placed overlapping an existing one.
    pub crowd_cluster_prob: f64,
    /// Head height over head width.
    pub head_aspect: f64,
    pub true_ratio: HeadBodyRatio,
    /// Median body height in pixels.
    pub height_median: f64,
    /// Log-space standard deviation of body height.
    pub height_sigma: f64,
    pub min_body_height: f64,
    /// Clustered placements are redrawn while the new head overlaps an
    /// existing head beyond this IoU; people do not share a head position.
    pub max_head_iou: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            width: 1333,
            height: 800,
            persons_per_image: 22.6,
            crowd_cluster_prob: 0.3,
            head_aspect: 1.25,
            // body 0.4 as wide as tall; head top 0.1 head-heights below the body top
            true_ratio: HeadBodyRatio { alpha_w: 3.0, alpha_h: 6.0, delta_x: 0.0, delta_y: 2.4 },
            // P(height >= 50) ≈ 0.85
            height_median: 80.0,
            height_sigma: 0.45,
            min_body_height: 20.0,
            max_head_iou: 0.2,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("sim.width", "image dimensions must be positive"));
        }
        if !(self.persons_per_image >= 0.0 && self.persons_per_image.is_finite()) {
            return Err(Error::invalid("sim.persons_per_image", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.crowd_cluster_prob) {
            return Err(Error::invalid("sim.crowd_cluster_prob", "must lie in [0, 1]"));
        }
        if !(self.head_aspect > 0.0 && self.head_aspect.is_finite()) {
            return Err(Error::invalid("sim.head_aspect", "must be positive"));
        }
        if !(self.height_median > 0.0 && self.height_sigma >= 0.0 && self.min_body_height > 0.0) {
            return Err(Error::invalid("sim.height_median", "height distribution must be positive"));
        }
        if !(0.0..=1.0).contains(&self.max_head_iou) {
            return Err(Error::invalid("sim.max_head_iou", "must lie in [0, 1]"));
        }
        self.true_ratio.validate()
    }
}

/// Parameters of a Beta score distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreModel {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Probability that a person yields a head and a body detection.
    pub detect_prob: f64,
    /// Center and log-size noise, as a fraction of box size.
    pub loc_jitter_sigma: f64,
    pub tp_score: ScoreModel,
    pub fp_score: ScoreModel,
    /// Body scores are scaled by `1 - occlusion_penalty * occlusion_ratio`.
    pub occlusion_penalty: f64,
    /// Extra pre-NMS proposals around every detected body.
    pub body_duplicates: u32,
    /// Extra pre-NMS proposals around every detected head.
    pub head_duplicates: u32,
    pub duplicate_jitter_sigma: f64,
    /// Expected head false positives per image, placed at limb-like sites.
    pub head_fp_rate: f64,
    /// Expected background body false positives per image.
    pub body_fp_rate: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            detect_prob: 0.9,
            loc_jitter_sigma: 0.03,
            tp_score: ScoreModel { alpha: 8.0, beta: 2.0 },
            fp_score: ScoreModel { alpha: 2.0, beta: 4.0 },
            occlusion_penalty: 0.3,
            body_duplicates: 2,
            head_duplicates: 1,
            duplicate_jitter_sigma: 0.06,
            head_fp_rate: 3.0,
            body_fp_rate: 1.0,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.detect_prob) {
            return Err(Error::invalid("noise.detect_prob", "must lie in [0, 1]"));
        }
        for (name, v) in [
            ("noise.loc_jitter_sigma", self.loc_jitter_sigma),
            ("noise.duplicate_jitter_sigma", self.duplicate_jitter_sigma),
            ("noise.head_fp_rate", self.head_fp_rate),
            ("noise.body_fp_rate", self.body_fp_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.occlusion_penalty) {
            return Err(Error::invalid("noise.occlusion_penalty", "must lie in [0, 1]"));
        }
        for (name, m) in [("noise.tp_score", self.tp_score), ("noise.fp_score", self.fp_score)] {
            if !(m.alpha > 0.0 && m.beta > 0.0) {
                return Err(Error::invalid(name, "Beta parameters must be positive"));
            }
        }
        Ok(())
    }
}

/// Identifier of the `index`-th simulated scene.
pub fn scene_id(index: u64) -> alloc::string::String {
    format!("scene_{index:05}")
}

/// Redraws of a clustered placement before falling back to a free one.
const CLUSTER_ATTEMPTS: usize = 8;

// Scenes and detector noise draw from separate ChaCha streams, so equal
// seeds do not replay the same numbers.
const SCENE_STREAM: u64 = 0;
const DETECTOR_STREAM: u64 = 1;

fn rng_for(seed: u64, index: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
    rng.set_stream(stream);
    rng
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let p = Poisson::new(mean).expect("positive finite mean");
    p.sample(rng) as u64
}

/// Generates the `index`-th scene; seeded by `cfg.seed + index`.
pub fn generate_scene(cfg: &SimConfig, index: u64) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, index, SCENE_STREAM);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let count = poisson(&mut rng, cfg.persons_per_image);
    let heights = LogNormal::new(libm::log(cfg.height_median), cfg.height_sigma)
        .map_err(|_| Error::invalid("sim.height_sigma", "invalid log-normal"))?;
    let max_height = (0.95 * h).max(cfg.min_body_height);
    let r = cfg.true_ratio;
    // body width / body height
    let body_aspect = r.alpha_w / (r.alpha_h * cfg.head_aspect);

    let mut bodies: Vec<BBox> = Vec::new();
    let mut heads: Vec<BBox> = Vec::new();
    for _ in 0..count {
        let mut placed = None;
        if !bodies.is_empty() && rng.random_bool(cfg.crowd_cluster_prob) {
            for _ in 0..CLUSTER_ATTEMPTS {
                let anchor = bodies[rng.random_range(0..bodies.len())];
                let bh = (anchor.height() * rng.random_range(0.85..1.15)).clamp(cfg.min_body_height, max_height);
                let bw = (bh * body_aspect).min(w);
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let shift = side * rng.random_range(0.15..0.5) * anchor.width();
                let (acx, _) = anchor.center();
                let bottom = anchor.y_max() + rng.random_range(-0.1..0.1) * anchor.height();
                let x0 = (acx + shift - bw / 2.0).clamp(0.0, w - bw);
                let y0 = (bottom - bh).clamp(0.0, h - bh);
                let body = BBox::new(x0, y0, x0 + bw, y0 + bh)?;
                let head = head_inside(&body, &r);
                if heads.iter().all(|o| iou(o, &head) <= cfg.max_head_iou) {
                    placed = Some((body, head));
                    break;
                }
            }
        }
        let (body, head) = match placed {
            Some(p) => p,
            None => {
                let bh = heights.sample(&mut rng).clamp(cfg.min_body_height, max_height);
                let bw = (bh * body_aspect).min(w);
                let x0 = rng.random_range(0.0..=(w - bw));
                let y0 = rng.random_range(0.0..=(h - bh));
                let body = BBox::new(x0, y0, x0 + bw, y0 + bh)?;
                (body, head_inside(&body, &r))
            }
        };
        bodies.push(body);
        heads.push(head);
    }

    let occlusion = occlusion_ratios(&bodies);
    let persons = bodies
        .iter()
        .zip(occlusion)
        .enumerate()
        .map(|(i, (body, occ))| PersonInstance {
            person_id: i as u64,
            head: heads[i],
            body: *body,
            ignore: false,
            occlusion_ratio: occ,
        })
        .collect();
    let scene = Scene { scene_id: scene_id(index), width: cfg.width, height: cfg.height, persons };
    scene.validate()?;
    Ok(scene)
}

/// Inverse of the head to body ratio, intersected with the body so the head
/// is contained even after rounding.
fn head_inside(body: &BBox, r: &HeadBodyRatio) -> BBox {
    let hw = body.width() / r.alpha_w;
    let hh = body.height() / r.alpha_h;
    let (bcx, bcy) = body.center();
    let head = BBox::from_center_size(bcx - r.delta_x * hw, bcy - r.delta_y * hh, hw, hh).expect("positive head size");
    intersect(&head, body)
}

fn intersect(a: &BBox, b: &BBox) -> BBox {
    let x0 = a.x_min().max(b.x_min());
    let y0 = a.y_min().max(b.y_min());
    let x1 = a.x_max().min(b.x_max()).max(x0);
    let y1 = a.y_max().min(b.y_max()).max(y0);
    BBox::new(x0, y0, x1, y1).expect("ordered corners")
}

/// Fraction of each body covered by the bodies in front of it. A body is in
/// front when its bottom edge is lower in the image (ties: later index).
pub fn occlusion_ratios(bodies: &[BBox]) -> Vec<f64> {
    bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let area = b.area();
            if area <= 0.0 {
                return 0.0;
            }
            let covers: Vec<BBox> = bodies
                .iter()
                .enumerate()
                .filter(|&(j, o)| j != i && (o.y_max() > b.y_max() || (o.y_max() == b.y_max() && j > i)))
                .map(|(_, o)| intersect(o, b))
                .filter(|c| c.area() > 0.0)
                .collect();
            (union_area(&covers) / area).clamp(0.0, 1.0)
        })
        .collect()
}

/// Exact area of a union of rectangles by coordinate compression.
pub fn union_area(rects: &[BBox]) -> f64 {
    if rects.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.x_min(), r.x_max()]).collect();
    let mut ys: Vec<f64> = rects.iter().flat_map(|r| [r.y_min(), r.y_max()]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut total = 0.0;
    for xw in xs.windows(2) {
        let mx = (xw[0] + xw[1]) / 2.0;
        for yw in ys.windows(2) {
            let my = (yw[0] + yw[1]) / 2.0;
            if rects.iter().any(|r| r.x_min() <= mx && mx <= r.x_max() && r.y_min() <= my && my <= r.y_max()) {
                total += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    total
}

struct Emitter {
    rng: ChaCha8Rng,
    width: f64,
    height: f64,
    next_head: u64,
    next_body: u64,
}

impl Emitter {
    fn jitter(&mut self, b: &BBox, sigma: f64) -> Option<BBox> {
        let (cx, cy) = b.center();
        let (w, h) = (b.width(), b.height());
        let out = if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).expect("positive sigma");
            let cx = cx + n.sample(&mut self.rng) * w;
            let cy = cy + n.sample(&mut self.rng) * h;
            let w = w * libm::exp(n.sample(&mut self.rng));
            let h = h * libm::exp(n.sample(&mut self.rng));
            BBox::from_center_size(cx, cy, w, h).ok()?
        } else {
            *b
        };
        let out = out.clip(self.width, self.height);
        (out.width() > 0.0 && out.height() > 0.0).then_some(out)
    }

    fn score(&mut self, m: ScoreModel) -> f64 {
        let beta = Beta::new(m.alpha, m.beta).expect("validated Beta parameters");
        beta.sample(&mut self.rng).clamp(0.0, 1.0)
    }

    fn push(&mut self, set: &mut DetectionSet, class: Class, bbox: BBox, score: f64) {
        let (list, next) = match class {
            Class::Head => (&mut set.heads_pre_nms, &mut self.next_head),
            Class::Body => (&mut set.bodies_pre_nms, &mut self.next_body),
        };
        list.push(Detection { id: *next, bbox, score, class });
        *next += 1;
    }
}

/// Raw (pre-NMS) head and body detections for `scene`; seeded by
/// `noise.seed + index`. Post-NMS lists are left empty.
pub fn simulate_detector(scene: &Scene, noise: &NoiseConfig, index: u64) -> Result<DetectionSet> {
    noise.validate()?;
    let mut em = Emitter {
        rng: rng_for(noise.seed, index, DETECTOR_STREAM),
        width: scene.width as f64,
        height: scene.height as f64,
        next_head: 0,
        next_body: 0,
    };
    let mut set = DetectionSet::new(scene.scene_id.clone());

    for p in &scene.persons {
        if !em.rng.random_bool(noise.detect_prob) {
            continue;
        }
        let head_score = em.score(noise.tp_score);
        if let Some(b) = em.jitter(&p.head, noise.loc_jitter_sigma) {
            em.push(&mut set, Class::Head, b, head_score);
            for _ in 0..noise.head_duplicates {
                let s = head_score * em.rng.random_range(0.5..0.95);
                if let Some(d) = em.jitter(&b, noise.duplicate_jitter_sigma) {
                    em.push(&mut set, Class::Head, d, s);
                }
            }
        }
        let body_score = em.score(noise.tp_score) * (1.0 - noise.occlusion_penalty * p.occlusion_ratio);
        if let Some(b) = em.jitter(&p.body, noise.loc_jitter_sigma) {
            em.push(&mut set, Class::Body, b, body_score);
            for _ in 0..noise.body_duplicates {
                let s = body_score * em.rng.random_range(0.5..0.95);
                if let Some(d) = em.jitter(&b, noise.duplicate_jitter_sigma) {
                    em.push(&mut set, Class::Body, d, s);
                }
            }
        }
    }

    if !scene.persons.is_empty() {
        for _ in 0..poisson(&mut em.rng, noise.head_fp_rate) {
            let p = &scene.persons[em.rng.random_range(0..scene.persons.len())];
            let site = limb_site(&mut em.rng, &p.body);
            let scale = em.rng.random_range(0.7..1.3);
            let (w, h) = (p.head.width() * scale, p.head.height() * scale);
            let b = BBox::from_center_size(site.0, site.1, w, h)?.clip(em.width, em.height);
            if b.width() > 0.0 && b.height() > 0.0 {
                let s = em.score(noise.fp_score);
                em.push(&mut set, Class::Head, b, s);
            }
        }
    }
    let mean_body = if scene.persons.is_empty() {
        None
    } else {
        let n = scene.persons.len() as f64;
        Some((
            scene.persons.iter().map(|p| p.body.width()).sum::<f64>() / n,
            scene.persons.iter().map(|p| p.body.height()).sum::<f64>() / n,
        ))
    };
    if let Some((bw, bh)) = mean_body {
        for _ in 0..poisson(&mut em.rng, noise.body_fp_rate) {
            let x0 = em.rng.random_range(0.0..=(em.width - bw).max(0.0));
            let y0 = em.rng.random_range(0.0..=(em.height - bh).max(0.0));
            let b = BBox::new(x0, y0, x0 + bw, y0 + bh)?.clip(em.width, em.height);
            if b.width() > 0.0 && b.height() > 0.0 {
                let s = em.score(noise.fp_score);
                em.push(&mut set, Class::Body, b, s);
            }
        }
    }
    Ok(set)
}

/// A point on a body where detectors mistake limbs or hair for heads.
fn limb_site(rng: &mut ChaCha8Rng, body: &BBox) -> (f64, f64) {
    let (x0, y0, w, h) = (body.x_min(), body.y_min(), body.width(), body.height());
    let (fx, fy) = match rng.random_range(0..6) {
        0 => (0.1, 0.9), // lower-left corner
        1 => (0.9, 0.9), // lower-right corner
        2 => (0.0, 0.5), // left hand
        3 => (1.0, 0.5), // right hand
        4 => (0.5, 0.7), // knees
        _ => (0.5, 0.4), // torso
    };
    let jx = rng.random_range(-0.05..0.05);
    let jy = rng.random_range(-0.05..0.05);
    (x0 + (fx + jx) * w, y0 + (fy + jy) * h)
}
