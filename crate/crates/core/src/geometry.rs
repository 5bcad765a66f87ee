//! Axis-aligned box arithmetic.
//!
//! Boxes are continuous, corner-form rectangles in image pixels. Besides the
//! usual intersection-over-union this module provides intersection-over-head
//! ([`ioh`]), the overlap normalized by the head box area alone. IoH is not
//! symmetric: a head lying entirely inside a body has IoH 1 regardless of how
//! large the body is.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `(x_min, y_min, x_max, y_max)`.
///
/// Zero-area boxes are allowed; negative extents and non-finite coordinates
/// are rejected by [`BBox::new`]. Serialized as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let finite = x_min.is_finite() && y_min.is_finite() && x_max.is_finite() && y_max.is_finite();
        if !finite || x_max < x_min || y_max < y_min {
            return Err(Error::InvalidBox(x_min, y_min, x_max, y_max));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    /// Builds a box from its center and size. Sizes must be non-negative.
    pub fn from_center_size(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        let hw = width / 2.0;
        let hh = height / 2.0;
        Self::new(cx - hw, cy - hh, cx + hw, cy + hh)
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[inline]
    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    /// True when `other` lies inside `self` (boundaries inclusive).
    pub fn contains(&self, other: &BBox) -> bool {
        other.x_min >= self.x_min && other.y_min >= self.y_min && other.x_max <= self.x_max && other.y_max <= self.y_max
    }

    /// Clips the box to `[0, width] x [0, height]`. The result may have zero
    /// area when the box lies outside the image.
    pub fn clip(&self, width: f64, height: f64) -> BBox {
        let x_min = self.x_min.clamp(0.0, width);
        let y_min = self.y_min.clamp(0.0, height);
        BBox {
            x_min,
            y_min,
            x_max: self.x_max.clamp(x_min, width.max(x_min)),
            y_max: self.y_max.clamp(y_min, height.max(y_min)),
        }
    }

    /// The box translated by `(dx, dy)`.
    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox { x_min: self.x_min + dx, y_min: self.y_min + dy, x_max: self.x_max + dx, y_max: self.y_max + dy }
    }

    /// The box scaled about the origin by `s > 0`.
    pub fn scale(&self, s: f64) -> BBox {
        BBox { x_min: self.x_min * s, y_min: self.y_min * s, x_max: self.x_max * s, y_max: self.y_max * s }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// Area of `b`.
#[inline]
pub fn area(b: &BBox) -> f64 {
    b.area()
}

/// Area of the geometric intersection of `a` and `b`; 0 when disjoint.
pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

/// Intersection over union. Two zero-area boxes have IoU 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Intersection over head box: `|head ∩ body| / |head|`.
///
/// Fails with [`Error::DegenerateBox`] when `head` has zero area.
pub fn ioh(head: &BBox, body: &BBox) -> Result<f64> {
    let head_area = head.area();
    if head_area <= 0.0 {
        return Err(Error::DegenerateBox("head"));
    }
    Ok(intersection_area(head, body) / head_area)
}
