use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::mdp_env::EpisodeSummary;
use crate::{Error, Result};

pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Aggregate evaluation metrics for one model at one noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub model: String,
    /// Evaluation noise in percent of the full spec.
    pub noise_level: f64,
    pub n_episodes: usize,
    /// Mean main-road speed after the merge (m/s).
    pub avg_velocity: f64,
    /// Mean merge time over episodes that merged; `None` if none did.
    pub avg_merge_time: Option<f64>,
    /// Fraction of episodes ending in a collision.
    pub avg_collisions: f64,
    /// Mean per-step comfort reward.
    pub avg_accel_jerk: f64,
    pub normalized_episodic_reward: f64,
    pub mean_return: f64,
}

impl MetricsRecord {
    pub fn from_episodes(model: &str, noise_level: f64, episodes: &[EpisodeSummary]) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::contract("metrics need at least one episode"));
        }
        let n = episodes.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeSummary) -> f64| episodes.iter().map(f).sum::<f64>() / n;
        let merged: Vec<f64> = episodes.iter().filter_map(|e| e.merge_time).collect();
        let rec = Self {
            model: model.to_string(),
            noise_level,
            n_episodes: episodes.len(),
            avg_velocity: round4(mean(&|e| e.mean_main_velocity)),
            avg_merge_time: (!merged.is_empty()).then(|| round4(merged.iter().sum::<f64>() / merged.len() as f64)),
            avg_collisions: round4(episodes.iter().filter(|e| e.collision).count() as f64 / n),
            avg_accel_jerk: round4(mean(&|e| e.mean_jerk)),
            normalized_episodic_reward: round4(mean(&|e| e.normalized_return)),
            mean_return: round4(mean(&|e| e.episode_return)),
        };
        rec.check()?;
        Ok(rec)
    }

    fn check(&self) -> Result<()> {
        let vals = [
            self.avg_velocity,
            self.avg_merge_time.unwrap_or(0.0),
            self.avg_collisions,
            self.avg_accel_jerk,
            self.normalized_episodic_reward,
            self.mean_return,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("metrics for {}", self.model)));
        }
        Ok(())
    }
}

pub const METRICS_HEADER: &str = "Type of modality,Average velocity (m/s),Average merge time (s),Average number of collisions,Average acceleration jerk (m/s^3),Normalized episodic rewards";
pub const NOISE_SWEEP_HEADER: &str = "Amount of noise added,Type of modality,Average velocity (m/s),Average merge time (s),Average number of collisions,Average acceleration jerk (m/s^3),Normalized episodic rewards";

fn row_tail(r: &MetricsRecord) -> String {
    let merge = r.avg_merge_time.map_or_else(|| "NA".to_string(), |m| format!("{m:.4}"));
    format!(
        "{:.4},{},{:.4},{:.4},{:.4}",
        r.avg_velocity, merge, r.avg_collisions, r.avg_accel_jerk, r.normalized_episodic_reward
    )
}

pub fn write_metrics_csv<W: Write>(out: &mut W, records: &[MetricsRecord]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(out, "{},{}", r.model, row_tail(r))?;
    }
    Ok(())
}

pub fn write_noise_sweep_csv<W: Write>(out: &mut W, records: &[MetricsRecord]) -> std::io::Result<()> {
    writeln!(out, "{NOISE_SWEEP_HEADER}")?;
    for r in records {
        writeln!(out, "{}%,{},{}", r.noise_level, r.model, row_tail(r))?;
    }
    Ok(())
}
