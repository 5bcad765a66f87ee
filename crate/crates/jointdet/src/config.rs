use std::path::{Path, PathBuf};

use jointdet_core::eval::EvalConfig;
use jointdet_core::nms::NmsConfig;
use jointdet_core::pipeline::PostProcessConfig;
use jointdet_core::rdm::TrainConfig;
use jointdet_core::sim::{NoiseConfig, SimConfig};
use serde::{Deserialize, Serialize};

use crate::formats;

/// Input and output locations. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scenes: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub ratio: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub nms: NmsConfig,
    pub postprocess: PostProcessConfig,
    pub eval: EvalConfig,
    pub train: TrainConfig,
    /// Overrides `train.seed` when set.
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let cfg: Self = formats::read_json_file(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> jointdet_core::Result<()> {
        self.nms.validate()?;
        self.postprocess.validate()?;
        self.eval.validate()?;
        self.train.validate()
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig { seed: self.seed.unwrap_or(self.train.seed), ..self.train }
    }
}

/// Input of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub sim: SimConfig,
    pub noise: NoiseConfig,
    pub num_scenes: u64,
    /// Index of the first scene; scene `i` is seeded by `seed + i`.
    pub first_index: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { sim: SimConfig::default(), noise: NoiseConfig::default(), num_scenes: 100, first_index: 0 }
    }
}

impl SimulationConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let cfg: Self = formats::read_json_file(path)?;
        cfg.sim.validate()?;
        cfg.noise.validate()?;
        Ok(cfg)
    }
}
