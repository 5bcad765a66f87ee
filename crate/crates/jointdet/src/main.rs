use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use jointdet::commands::{self, BASELINE_NAME, RDM_NAME};
use jointdet::config::{ExperimentConfig, SimulationConfig};
use jointdet::core::Class;
use jointdet::LOG_ENV;

/// Joint head and body detection post-processing: simulate crowds, train the
/// relationship discriminator, run the post-process and score it.
#[derive(Parser)]
#[command(name = "jointdet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes and raw detector output from a simulation config.
    Simulate {
        /// `{sim, noise, num_scenes, first_index}`; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        num_scenes: Option<u64>,
        /// Seeds both the scene generator and the detector noise.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the head-to-body ratio from annotated pairs.
    EstimateRatio {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the relationship discriminator; writes the model and a loss CSV.
    TrainRdm {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        loss: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Apply NMS and the post-process; writes results with and without it.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score a results file; writes PREFIX.json, PREFIX.csv and PREFIX.svg.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        class: Option<Class>,
        /// Legend and report label, e.g. "with RDM".
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate every eval result JSON in a directory as markdown.
    Report {
        #[arg(long)]
        dir: PathBuf,
        /// Defaults to DIR/report.md.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn experiment(config: Option<&Path>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn pick(flag: Option<PathBuf>, from_config: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone())
        .with_context(|| format!("no {what} path: pass --{what} or set paths.{what} in the config"))
}

/// A results file named by `run` maps to its variant label.
fn default_name(results: &Path) -> String {
    match results.file_name().and_then(|n| n.to_str()) {
        Some(commands::BASELINE_RESULTS) => BASELINE_NAME.into(),
        Some(commands::RDM_RESULTS) => RDM_NAME.into(),
        _ => results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "detector".into()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, scenes, detections, num_scenes, seed } => {
            let mut cfg = match config {
                Some(p) => SimulationConfig::load(&p).with_context(|| format!("loading config {}", p.display()))?,
                None => SimulationConfig::default(),
            };
            if let Some(n) = num_scenes {
                cfg.num_scenes = n;
            }
            if let Some(s) = seed {
                cfg.sim.seed = s;
                cfg.noise.seed = s;
            }
            commands::simulate(&cfg, &scenes, &detections)?;
        }
        Command::EstimateRatio { scenes, out } => {
            commands::estimate_ratio_file(&scenes, &out)?;
        }
        Command::TrainRdm { config, scenes, detections, model, loss, seed, epochs } => {
            let mut cfg = experiment(config.as_deref())?;
            if seed.is_some() {
                cfg.seed = seed;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let scenes = pick(scenes, &cfg.paths.scenes, "scenes")?;
            let detections = pick(detections, &cfg.paths.detections, "detections")?;
            let model = pick(model, &cfg.paths.model, "model")?;
            let loss = loss.unwrap_or_else(|| model.with_extension("loss.csv"));
            commands::train_rdm(&scenes, &detections, &cfg, &model, &loss)?;
        }
        Command::Run { config, detections, model, out_dir } => {
            let cfg = experiment(config.as_deref())?;
            let detections = pick(detections, &cfg.paths.detections, "detections")?;
            let model = pick(model, &cfg.paths.model, "model")?;
            let out_dir = pick(out_dir, &cfg.paths.out_dir, "out_dir")?;
            commands::run(&detections, &model, &cfg, &out_dir)?;
        }
        Command::Eval { config, results, scenes, class, name, out } => {
            let mut cfg = experiment(config.as_deref())?;
            if let Some(c) = class {
                cfg.eval.class_under_test = c;
            }
            let scenes = pick(scenes, &cfg.paths.scenes, "scenes")?;
            let name = name.unwrap_or_else(|| default_name(&results));
            commands::eval(&results, &scenes, &cfg.eval, &name, &out)?;
        }
        Command::Report { dir, out } => {
            let out = out.unwrap_or_else(|| dir.join("report.md"));
            let text = commands::report(&dir, &out)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
