//! Ground truth and detections.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Detection class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Head,
    Body,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Head => "head",
            Class::Body => "body",
        }
    }
}

impl core::fmt::Display for Class {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Class::Head),
            "body" => Ok(Class::Body),
            other => Err(Error::invalid("class", format!("unknown class {other:?}"))),
        }
    }
}

/// One annotated person: a head box inside a full-body box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonInstance {
    #[serde(rename = "id")]
    pub person_id: u64,
    pub head: BBox,
    pub body: BBox,
    pub ignore: bool,
    /// Fraction of the body area that is occluded, in `[0, 1]`.
    #[serde(rename = "occ")]
    pub occlusion_ratio: f64,
}

impl PersonInstance {
    pub fn validate(&self) -> Result<()> {
        if !self.body.contains(&self.head) {
            return Err(Error::invalid("head", "head box is not contained in the body box"));
        }
        if !(0.0..=1.0).contains(&self.occlusion_ratio) {
            return Err(Error::invalid("occ", format!("occlusion ratio {} outside [0, 1]", self.occlusion_ratio)));
        }
        Ok(())
    }
}

/// One image worth of ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_id: String,
    pub width: u32,
    pub height: u32,
    pub persons: Vec<PersonInstance>,
}

impl Scene {
    /// Checks every data-model invariant. Error fields carry the offending
    /// path, e.g. `persons[3].head`.
    pub fn validate(&self) -> Result<()> {
        let frame = BBox::new(0.0, 0.0, self.width as f64, self.height as f64)?;
        let mut ids = BTreeSet::new();
        for (i, p) in self.persons.iter().enumerate() {
            p.validate().map_err(|e| prefix_field(e, &format!("persons[{i}]")))?;
            for (name, b) in [("head", &p.head), ("body", &p.body)] {
                if !frame.contains(b) {
                    return Err(Error::invalid(
                        format!("persons[{i}].{name}"),
                        format!("box {:?} outside the {}x{} image", b.to_array(), self.width, self.height),
                    ));
                }
            }
            if !ids.insert(p.person_id) {
                return Err(Error::invalid(format!("persons[{i}].id"), format!("duplicate person id {}", p.person_id)));
            }
        }
        Ok(())
    }

    pub fn person(&self, person_id: u64) -> Option<&PersonInstance> {
        self.persons.iter().find(|p| p.person_id == person_id)
    }
}

/// A scored box of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub id: u64,
    pub bbox: BBox,
    pub score: f64,
    pub class: Class,
}

impl Detection {
    pub fn new(id: u64, class: Class, bbox: BBox, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid("score", format!("score {score} outside [0, 1]")));
        }
        Ok(Self { id, bbox, score, class })
    }
}

/// All detections of one scene, before and after NMS.
///
/// `heads` is H, `bodies_pre_nms` is B1 and `bodies` is B2 in the
/// post-process. `heads_pre_nms` holds raw head detections when the producer
/// emits them (the simulator does).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub scene_id: String,
    pub heads_pre_nms: Vec<Detection>,
    pub heads: Vec<Detection>,
    pub bodies_pre_nms: Vec<Detection>,
    pub bodies: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(scene_id: impl Into<String>) -> Self {
        Self { scene_id: scene_id.into(), ..Default::default() }
    }

    /// Checks scores, classes and id uniqueness of every list. The `B2 ⊆ B1`
    /// relation is checked separately by [`check_subset`].
    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("heads_pre_nms", Class::Head, &self.heads_pre_nms),
            ("heads", Class::Head, &self.heads),
            ("bodies_pre_nms", Class::Body, &self.bodies_pre_nms),
            ("bodies", Class::Body, &self.bodies),
        ];
        for (name, class, dets) in lists {
            validate_list(dets, class).map_err(|e| prefix_field(e, name))?;
        }
        Ok(())
    }
}

/// Checks that a list holds valid, uniquely identified detections of `class`.
pub fn validate_list(dets: &[Detection], class: Class) -> Result<()> {
    let mut ids = BTreeSet::new();
    for (i, d) in dets.iter().enumerate() {
        if d.class != class {
            return Err(Error::invalid(format!("[{i}].class"), format!("expected {class}, found {}", d.class)));
        }
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::invalid(format!("[{i}].score"), format!("score {} outside [0, 1]", d.score)));
        }
        if !ids.insert(d.id) {
            return Err(Error::invalid(format!("[{i}].id"), format!("duplicate id {}", d.id)));
        }
    }
    Ok(())
}

/// Checks that every id in `post` also appears in `pre`.
pub fn check_subset(pre: &[Detection], post: &[Detection]) -> Result<()> {
    let pre_ids: BTreeSet<u64> = pre.iter().map(|d| d.id).collect();
    match post.iter().find(|d| !pre_ids.contains(&d.id)) {
        Some(d) => Err(Error::Invariant(format!("post-NMS detection id {} is absent from the pre-NMS set", d.id))),
        None => Ok(()),
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidValue { field, reason } => {
            let field = if field.starts_with('[') { format!("{prefix}{field}") } else { format!("{prefix}.{field}") };
            Error::InvalidValue { field, reason }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn person(id: u64, head: BBox, body: BBox) -> PersonInstance {
        PersonInstance { person_id: id, head, body, ignore: false, occlusion_ratio: 0.0 }
    }

    #[test]
    fn valid_scene() {
        let scene = Scene {
            scene_id: "s".into(),
            width: 100,
            height: 100,
            persons: vec![person(0, bx(10.0, 10.0, 20.0, 20.0), bx(5.0, 10.0, 35.0, 90.0))],
        };
        scene.validate().unwrap();
    }

    #[test]
    fn head_outside_body_is_rejected() {
        let scene = Scene {
            scene_id: "s".into(),
            width: 100,
            height: 100,
            persons: vec![
                person(0, bx(10.0, 10.0, 20.0, 20.0), bx(5.0, 10.0, 35.0, 90.0)),
                person(1, bx(0.0, 0.0, 20.0, 20.0), bx(5.0, 10.0, 35.0, 90.0)),
            ],
        };
        match scene.validate() {
            Err(Error::InvalidValue { field, .. }) => assert_eq!(field, "persons[1].head"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_person_and_out_of_frame() {
        let p = person(3, bx(10.0, 10.0, 20.0, 20.0), bx(5.0, 10.0, 35.0, 90.0));
        let dup = Scene { scene_id: "s".into(), width: 100, height: 100, persons: vec![p.clone(), p.clone()] };
        assert!(dup.validate().is_err());
        let small = Scene { scene_id: "s".into(), width: 30, height: 100, persons: vec![p] };
        assert!(small.validate().is_err());
    }

    #[test]
    fn detection_score_range() {
        assert!(Detection::new(0, Class::Body, bx(0.0, 0.0, 1.0, 1.0), 1.5).is_err());
        assert!(Detection::new(0, Class::Body, bx(0.0, 0.0, 1.0, 1.0), f64::NAN).is_err());
        assert!(Detection::new(0, Class::Body, bx(0.0, 0.0, 1.0, 1.0), 1.0).is_ok());
    }

    #[test]
    fn subset_check() {
        let d = |id| Detection::new(id, Class::Body, bx(0.0, 0.0, 1.0, 1.0), 0.5).unwrap();
        assert!(check_subset(&[d(0), d(1)], &[d(1)]).is_ok());
        assert!(check_subset(&[d(0), d(1)], &[d(2)]).is_err());
    }

    #[test]
    fn duplicate_detection_ids() {
        let d = |id| Detection::new(id, Class::Head, bx(0.0, 0.0, 1.0, 1.0), 0.5).unwrap();
        let mut set = DetectionSet::new("s");
        set.heads = vec![d(1), d(1)];
        match set.validate() {
            Err(Error::InvalidValue { field, .. }) => assert_eq!(field, "heads[1].id"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
