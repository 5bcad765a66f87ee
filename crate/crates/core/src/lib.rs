//! Joint head and human-body detection post-processing.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the pure algorithmic
//! parts of the system:
//!
//! - [`geometry`]: corner-form boxes, IoU and intersection-over-head (IoH).
//! - [`data`]: ground-truth scenes, detections and per-scene detection sets.
//! - [`nms`]: deterministic greedy non-maximum suppression.
//! - [`ratio`]: the statistical head to body box transform.
//! - [`rdm`]: the relationship discriminator (pair features, a three-layer
//!   perceptron and its SGD trainer).
//! - [`pipeline`]: the post-process that recalls suppressed bodies and
//!   removes head false positives.
//! - [`eval`]: log-average miss rate (MR⁻²) over FPPI.
//! - [`sim`]: a synthetic crowd and noisy-detector simulator.
//!
//! File formats, the CLI and everything else touching the OS live in the
//! `jointdet` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod nms;
pub mod pipeline;
pub mod ratio;
pub mod rdm;
pub mod sim;

pub use data::{Class, Detection, DetectionSet, PersonInstance, Scene};
pub use error::{Error, Result};
pub use geometry::BBox;
