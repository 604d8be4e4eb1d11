use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mdp_env::EnvConfig;
use crate::neural::ArchConfig;
use crate::observation::{Modality, NoiseSpec};
use crate::ppo::PpoConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_episodes: usize,
    /// Percent levels for `sweep-noise`.
    pub noise_levels: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_episodes: 10, noise_levels: vec![0.0, 10.0, 25.0, 50.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Minimum Lane-2 gaps (front and rear, m) before the scripted merge starts.
    pub gap_threshold: f64,
    /// Distance (m) before the lane end where the waiting ego stops; must leave
    /// room for the lateral move into Lane 2.
    pub stop_margin: f64,
    /// Lateral gain (rad per m) used to center in Lane 2 after merging.
    pub lateral_gain: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { gap_threshold: 10.0, stop_margin: 15.0, lateral_gain: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub modality: Modality,
    /// Augment observations during training; always on for `multi-aug`.
    pub train_noise: bool,
    /// Number of updates between intermediate checkpoints (0 = final only).
    pub checkpoint_every: usize,
    pub env: EnvConfig,
    pub noise: NoiseSpec,
    pub arch: ArchConfig,
    pub ppo: PpoConfig,
    pub eval: EvalConfig,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            modality: Modality::Multi,
            train_noise: false,
            checkpoint_every: 0,
            env: EnvConfig::default(),
            noise: NoiseSpec::default(),
            arch: ArchConfig::default(),
            ppo: PpoConfig::default(),
            eval: EvalConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse { path: PathBuf::from("<inline>"), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::ConfigParse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.noise.validate()?;
        self.arch.validate()?;
        self.ppo.validate()?;
        if self.arch.image_width != self.env.window.width_px || self.arch.image_height != self.env.window.height_px {
            return Err(Error::config(format!(
                "arch image {}x{} does not match render window {}x{}",
                self.arch.image_width, self.arch.image_height, self.env.window.width_px, self.env.window.height_px
            )));
        }
        if self.arch.frames != crate::observation::STACK_DEPTH {
            return Err(Error::config(format!("arch.frames must be {}", crate::observation::STACK_DEPTH)));
        }
        if self.arch.action_dim != 2 {
            return Err(Error::config("arch.action_dim must be 2 (acceleration, heading)"));
        }
        if self.eval.n_episodes == 0 {
            return Err(Error::config("eval.n_episodes must be positive"));
        }
        for &l in &self.eval.noise_levels {
            if !(0.0..=100.0).contains(&l) {
                return Err(Error::config(format!("eval.noise_levels entry {l} outside [0, 100]")));
            }
        }
        let b = &self.baseline;
        if !(b.gap_threshold >= 0.0 && b.stop_margin > 0.0 && b.lateral_gain > 0.0) {
            return Err(Error::config("baseline: gap_threshold >= 0, stop_margin > 0, lateral_gain > 0 required"));
        }
        Ok(())
    }

    pub fn uses_training_noise(&self) -> bool {
        self.train_noise || self.modality == Modality::MultiAugmented
    }

    /// Environment settings with image rendering off when no branch reads it.
    pub fn env_for(&self, modality: Modality) -> EnvConfig {
        let mut env = self.env.clone();
        if !modality.uses_image() {
            env.render_images = false;
        }
        env
    }
}
