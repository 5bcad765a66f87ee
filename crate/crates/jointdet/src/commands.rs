//! One function per subcommand. Each reads its inputs completely, computes
//! everything in memory and only then writes, atomically, so a failing
//! command leaves no partial outputs behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use jointdet_core::eval::{compute_mr2, EvalConfig, EvalResult};
use jointdet_core::pipeline::{postprocess, PairLogEntry};
use jointdet_core::ratio::{estimate_ratio, RatioEstimate};
use jointdet_core::rdm::{build_training_pairs, train, GeometricFeatures, Rdm, TrainOutcome};
use jointdet_core::sim::{generate_scene, simulate_detector};
use jointdet_core::{Class, Detection, DetectionSet, Scene};
use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SimulationConfig};
use crate::formats::{self, Stages};
use crate::plot::{legend_label, render_svg, Series};

pub const BASELINE_RESULTS: &str = "results_baseline.jsonl";
pub const RDM_RESULTS: &str = "results_rdm.jsonl";
pub const AUDIT_LOG: &str = "audit.json";
pub const BASELINE_NAME: &str = "w/o RDM";
pub const RDM_NAME: &str = "with RDM";

fn require_file(path: &Path, what: &str) -> Result<()> {
    ensure!(path.is_file(), "{what} file {} does not exist", path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSummary {
    pub scenes: usize,
    pub persons: usize,
    pub heads: usize,
    pub bodies: usize,
}

pub fn simulate(cfg: &SimulationConfig, scenes_out: &Path, detections_out: &Path) -> Result<SimSummary> {
    cfg.sim.validate()?;
    cfg.noise.validate()?;
    let mut scenes = Vec::with_capacity(cfg.num_scenes as usize);
    let mut sets = Vec::with_capacity(cfg.num_scenes as usize);
    for index in cfg.first_index..cfg.first_index + cfg.num_scenes {
        let scene = generate_scene(&cfg.sim, index)?;
        sets.push(simulate_detector(&scene, &cfg.noise, index)?);
        scenes.push(scene);
    }
    let summary = SimSummary {
        scenes: scenes.len(),
        persons: scenes.iter().map(|s| s.persons.len()).sum(),
        heads: sets.iter().map(|s| s.heads_pre_nms.len()).sum(),
        bodies: sets.iter().map(|s| s.bodies_pre_nms.len()).sum(),
    };
    formats::write_scenes(scenes_out, &scenes)?;
    formats::write_detections(detections_out, &sets, Stages::PRE)?;
    info!("simulated {summary:?}");
    Ok(summary)
}

pub fn estimate_ratio_file(scenes: &Path, out: &Path) -> Result<RatioEstimate> {
    require_file(scenes, "scene")?;
    let scenes = formats::read_scenes(scenes)?;
    let pairs: Vec<_> = scenes.iter().flat_map(|s| s.persons.iter().map(|p| (p.head, p.body))).collect();
    let est = estimate_ratio(&pairs).context("estimating the head-body ratio")?;
    formats::write_ratio(out, &est.ratio)?;
    info!("ratio from {} pairs ({} skipped): {:?}", est.pairs_used, est.pairs_skipped, est.ratio);
    Ok(est)
}

/// Reads a detection file and fills in H, B1 and B2 with the configured NMS.
fn load_complete(path: &Path, cfg: &ExperimentConfig) -> Result<Vec<DetectionSet>> {
    formats::read_detections(path)?
        .iter()
        .map(|s| s.complete(&cfg.nms).with_context(|| format!("applying NMS to scene {:?}", s.set.scene_id)))
        .collect()
}

pub fn train_rdm(
    scenes: &Path,
    detections: &Path,
    cfg: &ExperimentConfig,
    model_out: &Path,
    loss_out: &Path,
) -> Result<TrainOutcome> {
    require_file(scenes, "scene")?;
    require_file(detections, "detection")?;
    cfg.validate()?;
    let scenes = formats::read_scenes(scenes)?;
    let sets = load_complete(detections, cfg)?;
    let pairs = build_training_pairs(&scenes, &sets, cfg.postprocess.lambda, &GeometricFeatures)?;
    let positives = pairs.iter().filter(|p| p.label).count();
    info!("{} training pairs, {positives} positive", pairs.len());
    let outcome = train(&pairs, &cfg.training()).context("training the relationship model")?;
    for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
        debug!("epoch {}: mean bce {loss:.6}", epoch + 1);
    }
    formats::write_model(model_out, &outcome.model)?;
    formats::write_loss_csv(loss_out, &outcome.loss_trace)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAudit {
    pub scene_id: String,
    pub recalled_body_ids: Vec<u64>,
    pub removed_head_ids: Vec<u64>,
    pub pair_log: Vec<PairLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub scenes: usize,
    pub recalled_bodies: usize,
    pub removed_heads: usize,
    pub scored_pairs: usize,
    pub per_scene: Vec<SceneAudit>,
}

/// Writes the NMS-only results, the post-processed results and the audit log
/// into `out_dir`.
pub fn run(detections: &Path, model: &Path, cfg: &ExperimentConfig, out_dir: &Path) -> Result<AuditLog> {
    require_file(detections, "detection")?;
    require_file(model, "model")?;
    cfg.validate()?;
    let model = formats::read_model(model)?;
    let rdm = Rdm::new(&model)?;
    let sets = load_complete(detections, cfg)?;

    let mut baseline = Vec::with_capacity(sets.len());
    let mut refined = Vec::with_capacity(sets.len());
    let mut per_scene = Vec::with_capacity(sets.len());
    for set in &sets {
        let out = postprocess(&set.heads, &set.bodies_pre_nms, &set.bodies, &rdm, &cfg.postprocess)
            .with_context(|| format!("post-processing scene {:?}", set.scene_id))?;
        baseline.push(DetectionSet {
            scene_id: set.scene_id.clone(),
            heads: set.heads.clone(),
            bodies: set.bodies.clone(),
            ..Default::default()
        });
        refined.push(DetectionSet {
            scene_id: set.scene_id.clone(),
            heads: out.final_heads,
            bodies: out.final_bodies,
            ..Default::default()
        });
        per_scene.push(SceneAudit {
            scene_id: set.scene_id.clone(),
            recalled_body_ids: out.recalled_body_ids,
            removed_head_ids: out.removed_head_ids,
            pair_log: out.pair_log,
        });
    }
    let audit = AuditLog {
        scenes: per_scene.len(),
        recalled_bodies: per_scene.iter().map(|s| s.recalled_body_ids.len()).sum(),
        removed_heads: per_scene.iter().map(|s| s.removed_head_ids.len()).sum(),
        scored_pairs: per_scene.iter().map(|s| s.pair_log.len()).sum(),
        per_scene,
    };
    formats::write_detections(&out_dir.join(BASELINE_RESULTS), &baseline, Stages::POST)?;
    formats::write_detections(&out_dir.join(RDM_RESULTS), &refined, Stages::POST)?;
    formats::write_json_file(&out_dir.join(AUDIT_LOG), &audit)?;
    info!("{} scenes: {} bodies recalled, {} heads removed", audit.scenes, audit.recalled_bodies, audit.removed_heads);
    Ok(audit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledPoint {
    pub fppi: f64,
    pub miss_rate: f64,
}

/// The `eval` result JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub name: String,
    pub class: Class,
    pub mr2: f64,
    pub num_gt: usize,
    pub num_images: usize,
    pub num_detections: usize,
    pub sampled: Vec<SampledPoint>,
}

/// Scores the post-NMS detections of `cfg.class_under_test` in a results file.
/// Also returns the number of detections scored.
pub fn evaluate_results(results: &Path, scenes: &[Scene], cfg: &EvalConfig) -> Result<(EvalResult, usize)> {
    require_file(results, "results")?;
    let staged = formats::read_detections(results)?;
    ensure!(!staged.is_empty(), "{}: no detections", results.display());
    let class = cfg.class_under_test;
    let lists: Vec<(&str, &[Detection])> =
        staged.iter().filter_map(|s| s.final_list(class).map(|d| (s.set.scene_id.as_str(), d))).collect();
    if lists.is_empty() {
        bail!("{}: no post_nms {class} detections", results.display());
    }
    let count = lists.iter().map(|(_, d)| d.len()).sum();
    Ok((compute_mr2(scenes, &lists, cfg)?, count))
}

/// Writes `<prefix>.json`, `<prefix>.csv` and `<prefix>.svg`.
pub fn eval(results: &Path, scenes: &Path, cfg: &EvalConfig, name: &str, prefix: &Path) -> Result<EvalReport> {
    require_file(scenes, "scene")?;
    cfg.validate()?;
    let scenes = formats::read_scenes(scenes)?;
    let (result, num_detections) = evaluate_results(results, &scenes, cfg)?;
    let report = EvalReport {
        name: name.to_string(),
        class: cfg.class_under_test,
        mr2: result.mr2,
        num_gt: result.num_gt,
        num_images: result.num_images,
        num_detections,
        sampled: result.sampled.iter().map(|&(fppi, miss_rate)| SampledPoint { fppi, miss_rate }).collect(),
    };
    let svg = render_svg(&[Series { name, mr2: result.mr2, curve: &result.curve }]);
    formats::write_json_file(&with_ext(prefix, "json"), &report)?;
    formats::write_curve_csv(&with_ext(prefix, "csv"), &result.curve)?;
    formats::write_atomic(&with_ext(prefix, "svg"), |w| w.write_all(svg.as_bytes()))?;
    info!("{} ({}): {}", name, cfg.class_under_test, legend_label(name, result.mr2));
    Ok(report)
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Every eval result JSON directly inside `dir`, by file name.
pub fn collect_reports(dir: &Path) -> Result<Vec<EvalReport>> {
    ensure!(dir.is_dir(), "report directory {} does not exist", dir.display());
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    let mut out = Vec::new();
    for f in files {
        match formats::read_json_file::<EvalReport>(&f) {
            Ok(r) => out.push(r),
            Err(e) => debug!("skipping {}: {e}", f.display()),
        }
    }
    Ok(out)
}

/// Markdown table with one row per variant and one column per class.
pub fn render_report(reports: &[EvalReport]) -> String {
    let mut names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    names.sort();
    names.dedup();
    let cell = |name: &str, class: Class| {
        reports
            .iter()
            .find(|r| r.name == name && r.class == class)
            .map(|r| format!("{:.2}", r.mr2 * 100.0))
            .unwrap_or_else(|| "-".into())
    };
    let mut s = String::from("| Method | Head MR⁻² (%) | Body MR⁻² (%) |\n|---|---:|---:|\n");
    for name in &names {
        s.push_str(&format!("| {name} | {} | {} |\n", cell(name, Class::Head), cell(name, Class::Body)));
    }
    let delta = |class: Class| {
        let get = |n: &str| reports.iter().find(|r| r.name == n && r.class == class).map(|r| r.mr2);
        match (get(BASELINE_NAME), get(RDM_NAME)) {
            (Some(a), Some(b)) => format!("{:+.2}", (b - a) * 100.0),
            _ => "-".into(),
        }
    };
    if names.contains(&BASELINE_NAME) && names.contains(&RDM_NAME) {
        s.push_str(&format!(
            "| Δ ({RDM_NAME} − {BASELINE_NAME}) | {} | {} |\n",
            delta(Class::Head),
            delta(Class::Body)
        ));
    }
    if let Some(r) = reports.first() {
        s.push_str(&format!("\n{} images, lower is better.\n", r.num_images));
    }
    s
}

pub fn report(dir: &Path, out: &Path) -> Result<String> {
    let reports = collect_reports(dir)?;
    ensure!(!reports.is_empty(), "no eval results in {}", dir.display());
    let text = render_report(&reports);
    formats::write_atomic(out, |w| w.write_all(text.as_bytes()))?;
    Ok(text)
}
