//! On-disk formats.
//!
//! Scenes and detections are JSON lines, one record per line, optionally
//! preceded by a `{"format": ...}` header line. Models and ratios are single
//! JSON documents; loss traces and curves are CSV. Every writer goes through
//! [`write_atomic`].

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use jointdet_core::data::{check_subset, validate_list};
use jointdet_core::eval::CurvePoint;
use jointdet_core::nms::NmsConfig;
use jointdet_core::pipeline::apply_nms;
use jointdet_core::ratio::HeadBodyRatio;
use jointdet_core::rdm::{Dense, RelationModel};
use jointdet_core::{BBox, Class, Detection, DetectionSet, Scene};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCENE_FORMAT: &str = "jointdet-scenes/1";
pub const DETECTION_FORMAT: &str = "jointdet-detections/1";
pub const MODEL_FORMAT: &str = "jointdet-rdm/1";
/// The only feature extractor the CLI knows how to rebuild from a model file.
pub const GEOMETRIC_FEATURES: &str = "geometric";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}:{line}: {field}: {reason}", path.display())]
    Line { path: PathBuf, line: usize, field: String, reason: String },
    #[error("{}: {reason}", path.display())]
    File { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn line_err(path: &Path, line: usize, field: impl Into<String>, reason: impl ToString) -> FormatError {
    FormatError::Line { path: path.to_path_buf(), line, field: field.into(), reason: reason.to_string() }
}

fn core_err(path: &Path, line: usize, e: jointdet_core::Error) -> FormatError {
    match e {
        jointdet_core::Error::InvalidValue { field, reason } => line_err(path, line, field, reason),
        other => line_err(path, line, "-", other),
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed write never leaves a truncated output.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(path))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| FormatError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
}

/// Parses one record, reporting the JSON path of the offending field.
fn parse_record<T: DeserializeOwned>(path: &Path, line_no: usize, line: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(line);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "-".to_string() } else { field };
        line_err(path, line_no, field, e.into_inner())
    })
}

/// Non-blank lines with 1-based numbers; a leading header must name `format`.
fn records(path: &Path, format: &str) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut first = true;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first) {
            if let Ok(h) = serde_json::from_str::<Header>(&line) {
                if h.format != format {
                    return Err(line_err(path, i + 1, "format", format!("expected {format:?}, found {:?}", h.format)));
                }
                continue;
            }
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, format: &str, items: &[T]) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer(&mut *w, &Header { format: format.into() })?;
        w.write_all(b"\n")?;
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_scenes(path: &Path) -> Result<Vec<Scene>> {
    let mut seen = HashMap::new();
    let mut scenes = Vec::new();
    for (line_no, line) in records(path, SCENE_FORMAT)? {
        let scene: Scene = parse_record(path, line_no, &line)?;
        scene.validate().map_err(|e| core_err(path, line_no, e))?;
        if let Some(prev) = seen.insert(scene.scene_id.clone(), line_no) {
            return Err(line_err(path, line_no, "scene_id", format!("duplicate of line {prev}")));
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

pub fn write_scenes(path: &Path, scenes: &[Scene]) -> Result<()> {
    write_lines(path, SCENE_FORMAT, scenes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PreNms,
    PostNms,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetEntry {
    id: u64,
    #[serde(rename = "box")]
    bbox: BBox,
    score: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetLine {
    scene_id: String,
    class: Class,
    stage: Stage,
    dets: Vec<DetEntry>,
}

/// Which of the four detection lists a file provided for one scene.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stages {
    pub heads_pre_nms: bool,
    pub heads: bool,
    pub bodies_pre_nms: bool,
    pub bodies: bool,
}

impl Stages {
    pub const PRE: Stages = Stages { heads_pre_nms: true, heads: false, bodies_pre_nms: true, bodies: false };
    pub const POST: Stages = Stages { heads_pre_nms: false, heads: true, bodies_pre_nms: false, bodies: true };
    pub const ALL: Stages = Stages { heads_pre_nms: true, heads: true, bodies_pre_nms: true, bodies: true };

    fn get(&self, class: Class, stage: Stage) -> bool {
        match (class, stage) {
            (Class::Head, Stage::PreNms) => self.heads_pre_nms,
            (Class::Head, Stage::PostNms) => self.heads,
            (Class::Body, Stage::PreNms) => self.bodies_pre_nms,
            (Class::Body, Stage::PostNms) => self.bodies,
        }
    }

    fn set(&mut self, class: Class, stage: Stage) {
        match (class, stage) {
            (Class::Head, Stage::PreNms) => self.heads_pre_nms = true,
            (Class::Head, Stage::PostNms) => self.heads = true,
            (Class::Body, Stage::PreNms) => self.bodies_pre_nms = true,
            (Class::Body, Stage::PostNms) => self.bodies = true,
        }
    }
}

/// Detections of one scene as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedSet {
    pub set: DetectionSet,
    pub stages: Stages,
}

impl StagedSet {
    /// H, B1 and B2 ready for the post-process. A class that only has raw
    /// detections goes through NMS; one that only has post-NMS detections
    /// uses them as its pre-NMS list too, which leaves nothing to recall.
    pub fn complete(&self, nms: &NmsConfig) -> jointdet_core::Result<DetectionSet> {
        let derived = apply_nms(&self.set, nms)?;
        let mut out = self.set.clone();
        match (self.stages.heads_pre_nms, self.stages.heads) {
            (true, false) => {
                out.heads_pre_nms = derived.heads_pre_nms;
                out.heads = derived.heads;
            }
            (false, true) => out.heads_pre_nms = out.heads.clone(),
            _ => {}
        }
        match (self.stages.bodies_pre_nms, self.stages.bodies) {
            (true, false) => {
                out.bodies_pre_nms = derived.bodies_pre_nms;
                out.bodies = derived.bodies;
            }
            (false, true) => out.bodies_pre_nms = out.bodies.clone(),
            _ => {}
        }
        Ok(out)
    }

    /// The list a results consumer should score for `class`: post-NMS when
    /// present, otherwise nothing.
    pub fn final_list(&self, class: Class) -> Option<&[Detection]> {
        match class {
            Class::Head => self.stages.heads.then_some(self.set.heads.as_slice()),
            Class::Body => self.stages.bodies.then_some(self.set.bodies.as_slice()),
        }
    }
}

fn list_mut(set: &mut DetectionSet, class: Class, stage: Stage) -> &mut Vec<Detection> {
    match (class, stage) {
        (Class::Head, Stage::PreNms) => &mut set.heads_pre_nms,
        (Class::Head, Stage::PostNms) => &mut set.heads,
        (Class::Body, Stage::PreNms) => &mut set.bodies_pre_nms,
        (Class::Body, Stage::PostNms) => &mut set.bodies,
    }
}

/// Reads a detection file, grouping lines by scene in order of first
/// appearance. Each `(scene, class, stage)` may appear once; when both stages
/// of a class are present the post-NMS ids must be a subset of the pre-NMS ids.
pub fn read_detections(path: &Path) -> Result<Vec<StagedSet>> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut sets: Vec<StagedSet> = Vec::new();
    let mut line_of: HashMap<(usize, Class, Stage), usize> = HashMap::new();
    for (line_no, line) in records(path, DETECTION_FORMAT)? {
        let rec: DetLine = parse_record(path, line_no, &line)?;
        let dets = rec
            .dets
            .iter()
            .enumerate()
            .map(|(i, d)| {
                Detection::new(d.id, rec.class, d.bbox, d.score)
                    .map_err(|e| core_err(path, line_no, e))
                    .map_err(|e| with_prefix(e, &format!("dets[{i}]")))
            })
            .collect::<Result<Vec<_>>>()?;
        validate_list(&dets, rec.class).map_err(|e| with_prefix(core_err(path, line_no, e), "dets"))?;

        let si = *index.entry(rec.scene_id.clone()).or_insert_with(|| {
            sets.push(StagedSet { set: DetectionSet::new(rec.scene_id.clone()), stages: Stages::default() });
            sets.len() - 1
        });
        let staged = &mut sets[si];
        if staged.stages.get(rec.class, rec.stage) {
            let prev = line_of[&(si, rec.class, rec.stage)];
            return Err(line_err(
                path,
                line_no,
                "stage",
                format!("{} {:?} detections for {:?} already given on line {prev}", rec.class, rec.stage, rec.scene_id),
            ));
        }
        staged.stages.set(rec.class, rec.stage);
        line_of.insert((si, rec.class, rec.stage), line_no);
        *list_mut(&mut staged.set, rec.class, rec.stage) = dets;

        let other = match rec.stage {
            Stage::PreNms => Stage::PostNms,
            Stage::PostNms => Stage::PreNms,
        };
        if staged.stages.get(rec.class, other) {
            let set = &staged.set;
            let (pre, post) = match rec.class {
                Class::Head => (&set.heads_pre_nms, &set.heads),
                Class::Body => (&set.bodies_pre_nms, &set.bodies),
            };
            check_subset(pre, post).map_err(|e| line_err(path, line_no, "dets", e))?;
        }
    }
    Ok(sets)
}

fn with_prefix(e: FormatError, prefix: &str) -> FormatError {
    match e {
        FormatError::Line { path, line, field, reason } => {
            let field = if field == "-" {
                prefix.to_string()
            } else if field.starts_with('[') {
                format!("{prefix}{field}")
            } else {
                format!("{prefix}.{field}")
            };
            FormatError::Line { path, line, field, reason }
        }
        other => other,
    }
}

/// Writes the selected lists of every set, one line per `(scene, class, stage)`.
pub fn write_detections(path: &Path, sets: &[DetectionSet], stages: Stages) -> Result<()> {
    let mut lines = Vec::new();
    for set in sets {
        for (class, stage, list) in [
            (Class::Head, Stage::PreNms, &set.heads_pre_nms),
            (Class::Head, Stage::PostNms, &set.heads),
            (Class::Body, Stage::PreNms, &set.bodies_pre_nms),
            (Class::Body, Stage::PostNms, &set.bodies),
        ] {
            if stages.get(class, stage) {
                lines.push(DetLine {
                    scene_id: set.scene_id.clone(),
                    class,
                    stage,
                    dets: list.iter().map(|d| DetEntry { id: d.id, bbox: d.bbox, score: d.score }).collect(),
                });
            }
        }
    }
    write_lines(path, DETECTION_FORMAT, &lines)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    features: String,
    layers: Vec<Dense>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        FormatError::File { path: path.to_path_buf(), reason: format!("{field}: {}", e.into_inner()) }
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

pub fn read_model(path: &Path) -> Result<RelationModel> {
    let file: ModelFile = read_json(path)?;
    let bad = |reason: String| FormatError::File { path: path.to_path_buf(), reason };
    if file.format != MODEL_FORMAT {
        return Err(bad(format!("format: expected {MODEL_FORMAT:?}, found {:?}", file.format)));
    }
    if file.features != GEOMETRIC_FEATURES {
        return Err(bad(format!("features: unsupported extractor {:?}", file.features)));
    }
    RelationModel::from_layers(file.layers).map_err(|e| bad(e.to_string()))
}

pub fn write_model(path: &Path, model: &RelationModel) -> Result<()> {
    write_json(
        path,
        &ModelFile {
            format: MODEL_FORMAT.into(),
            features: GEOMETRIC_FEATURES.into(),
            layers: model.layers().to_vec(),
        },
    )
}

pub fn read_ratio(path: &Path) -> Result<HeadBodyRatio> {
    let r: HeadBodyRatio = read_json(path)?;
    r.validate().map_err(|e| FormatError::File { path: path.to_path_buf(), reason: e.to_string() })?;
    Ok(r)
}

pub fn write_ratio(path: &Path, ratio: &HeadBodyRatio) -> Result<()> {
    write_json(path, ratio)
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// `epoch,mean_bce`, epochs counted from 1.
pub fn write_loss_csv(path: &Path, trace: &[f64]) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "mean_bce"]).map_err(csv_io)?;
        for (i, loss) in trace.iter().enumerate() {
            out.serialize((i + 1, loss)).map_err(csv_io)?;
        }
        out.flush()
    })
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| FormatError::File { path: path.to_path_buf(), reason: e.to_string() })?;
    rdr.deserialize::<(usize, f64)>()
        .enumerate()
        .map(|(i, row)| row.map(|(_, loss)| loss).map_err(|e| line_err(path, i + 2, "mean_bce", e)))
        .collect()
}

/// `threshold,fppi,miss_rate`, one row per curve point.
pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["threshold", "fppi", "miss_rate"]).map_err(csv_io)?;
        for c in curve {
            out.serialize((c.threshold, c.fppi, c.miss_rate)).map_err(csv_io)?;
        }
        out.flush()
    })
}
