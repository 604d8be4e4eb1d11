use std::path::{Path, PathBuf};

use crate::neural::load_checkpoint;
use crate::observation::Modality;
use crate::Result;

use super::config::ExperimentConfig;
use super::eval::evaluate_params;
use super::metrics::MetricsRecord;

/// A trained policy to sweep: its observation modality and checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepModel {
    pub modality: Modality,
    pub checkpoint: PathBuf,
}

/// Evaluates every model at every noise level (percent of the configured
/// noise spec). Records are ordered by model, then level.
pub fn noise_sweep(cfg: &ExperimentConfig, models: &[SweepModel], levels: &[f64], n_episodes: usize) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(models.len() * levels.len());
    for m in models {
        let (params, _) = load_checkpoint(&m.checkpoint, &cfg.arch, cfg.ppo.adam)?;
        for &level in levels {
            records.push(evaluate_params(&params, cfg, m.modality, n_episodes, level)?.0);
        }
    }
    Ok(records)
}

/// Finds `<dir>/<modality>/checkpoint.bin` for every modality present.
pub fn discover_models(dir: &Path, checkpoint_file: &str) -> Vec<SweepModel> {
    Modality::ALL
        .iter()
        .map(|&modality| SweepModel { modality, checkpoint: dir.join(modality.as_str()).join(checkpoint_file) })
        .filter(|m| m.checkpoint.is_file())
        .collect()
}
