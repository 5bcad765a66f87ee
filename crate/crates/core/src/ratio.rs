//! Statistical head to body transform.
//!
//! A body box is modelled as a scaled, offset copy of its head box: the body
//! is `alpha_w` head-widths wide and `alpha_h` head-heights tall, and its
//! center sits `(delta_x, delta_y)` head-sizes away from the head center.
//! Parameters are estimated as per-pair medians, which tolerates the
//! crouching and truncated persons common in crowd annotations.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadBodyRatio {
    pub alpha_w: f64,
    pub alpha_h: f64,
    pub delta_x: f64,
    pub delta_y: f64,
}

impl HeadBodyRatio {
    pub const IDENTITY: HeadBodyRatio = HeadBodyRatio { alpha_w: 1.0, alpha_h: 1.0, delta_x: 0.0, delta_y: 0.0 };

    pub fn new(alpha_w: f64, alpha_h: f64, delta_x: f64, delta_y: f64) -> Result<Self> {
        let r = Self { alpha_w, alpha_h, delta_x, delta_y };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_w > 0.0 && self.alpha_w.is_finite()) {
            return Err(Error::invalid("alpha_w", "must be positive and finite"));
        }
        if !(self.alpha_h > 0.0 && self.alpha_h.is_finite()) {
            return Err(Error::invalid("alpha_h", "must be positive and finite"));
        }
        if !(self.delta_x.is_finite() && self.delta_y.is_finite()) {
            return Err(Error::invalid("delta", "offsets must be finite"));
        }
        Ok(())
    }

    /// Parameters of a single pair, or `None` when the head has zero area.
    pub fn of_pair(head: &BBox, body: &BBox) -> Option<Self> {
        let (hw, hh) = (head.width(), head.height());
        if hw <= 0.0 || hh <= 0.0 {
            return None;
        }
        let (hcx, hcy) = head.center();
        let (bcx, bcy) = body.center();
        Some(Self {
            alpha_w: body.width() / hw,
            alpha_h: body.height() / hh,
            delta_x: (bcx - hcx) / hw,
            delta_y: (bcy - hcy) / hh,
        })
    }
}

/// Result of [`estimate_ratio`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub ratio: HeadBodyRatio,
    pub pairs_used: usize,
    /// Pairs dropped because the head had zero area.
    pub pairs_skipped: usize,
}

/// Median-aggregated head to body ratio over annotated pairs.
pub fn estimate_ratio(pairs: &[(BBox, BBox)]) -> Result<RatioEstimate> {
    if pairs.is_empty() {
        return Err(Error::Empty("head-body pairs"));
    }
    let per_pair: Vec<HeadBodyRatio> = pairs.iter().filter_map(|(h, b)| HeadBodyRatio::of_pair(h, b)).collect();
    let skipped = pairs.len() - per_pair.len();
    if per_pair.is_empty() {
        return Err(Error::Empty("head-body pairs with positive-area heads"));
    }
    let column = |f: fn(&HeadBodyRatio) -> f64| {
        let mut v: Vec<f64> = per_pair.iter().map(f).collect();
        median(&mut v)
    };
    let ratio = HeadBodyRatio {
        alpha_w: column(|r| r.alpha_w),
        alpha_h: column(|r| r.alpha_h),
        delta_x: column(|r| r.delta_x),
        delta_y: column(|r| r.delta_y),
    };
    ratio.validate()?;
    Ok(RatioEstimate { ratio, pairs_used: per_pair.len(), pairs_skipped: skipped })
}

/// Exact median; the mean of the two middle values for even lengths.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Infers a body box from a head box.
pub fn apply_ratio(head: &BBox, r: &HeadBodyRatio) -> BBox {
    let (hw, hh) = (head.width(), head.height());
    let (hcx, hcy) = head.center();
    let cx = hcx + r.delta_x * hw;
    let cy = hcy + r.delta_y * hh;
    let (bw, bh) = (r.alpha_w * hw, r.alpha_h * hh);
    BBox::from_center_size(cx, cy, bw, bh).expect("positive ratio yields a valid box")
}

/// [`apply_ratio`] clipped to a `width x height` image.
pub fn apply_ratio_clipped(head: &BBox, r: &HeadBodyRatio, width: f64, height: f64) -> BBox {
    apply_ratio(head, r).clip(width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn single_pair_by_hand() {
        // body 30x80 centered (20, 50); head 10x10 centered (15, 15)
        let est = estimate_ratio(&[(bx(10.0, 10.0, 20.0, 20.0), bx(5.0, 10.0, 35.0, 90.0))]).unwrap();
        assert_eq!(est.ratio, HeadBodyRatio::new(3.0, 8.0, 0.5, 3.5).unwrap());
        assert_eq!(est.pairs_used, 1);
    }

    #[test]
    fn copies_give_same_result() {
        let pair = (bx(10.0, 10.0, 20.0, 20.0), bx(5.0, 10.0, 35.0, 90.0));
        let one = estimate_ratio(&[pair]).unwrap().ratio;
        let many = estimate_ratio(&vec![pair; 8]).unwrap().ratio;
        assert_eq!(one, many);
    }

    #[test]
    fn apply_examples() {
        let head = bx(10.0, 10.0, 20.0, 20.0);
        assert_eq!(apply_ratio(&head, &HeadBodyRatio::IDENTITY), head);
        let r = HeadBodyRatio::new(3.0, 8.0, 0.5, 3.5).unwrap();
        assert_eq!(apply_ratio(&head, &r), bx(5.0, 10.0, 35.0, 90.0));
        assert_eq!(apply_ratio_clipped(&head, &r, 30.0, 50.0), bx(5.0, 10.0, 30.0, 50.0));
    }

    #[test]
    fn errors_and_skips() {
        assert_eq!(estimate_ratio(&[]), Err(Error::Empty("head-body pairs")));
        let degenerate = (bx(10.0, 10.0, 10.0, 20.0), bx(5.0, 10.0, 35.0, 90.0));
        assert!(estimate_ratio(&[degenerate]).is_err());
        let good = (bx(10.0, 10.0, 20.0, 20.0), bx(5.0, 10.0, 35.0, 90.0));
        let est = estimate_ratio(&[degenerate, good]).unwrap();
        assert_eq!(est.pairs_skipped, 1);
        assert_eq!(est.pairs_used, 1);
    }

    #[test]
    fn even_median() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [5.0, 1.0, 3.0]), 3.0);
    }

    #[test]
    fn invalid_ratio() {
        assert!(HeadBodyRatio::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(HeadBodyRatio::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(HeadBodyRatio::new(1.0, 1.0, f64::NAN, 0.0).is_err());
    }
}
