use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mdp_env::Outcome;
use crate::neural::{save_checkpoint, Adam, Branches, NetworkParams};
use crate::ppo::{collect_rollout, episode_seed, update, ActionSpace, UpdateStats, VecEnv};
use crate::traffic_sim::TopologyKind;
use crate::Result;

use super::config::ExperimentConfig;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CURVE_FILE: &str = "curve.jsonl";
pub const PROGRESS_FILE: &str = "progress.jsonl";
pub const CONFIG_FILE: &str = "config.toml";

/// One finished training episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Environment steps (all workers) taken when the episode ended.
    pub step: usize,
    pub episode: usize,
    pub worker: usize,
    pub seed: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub normalized_return: f64,
    pub length: usize,
    pub outcome: Outcome,
}

/// One line per PPO update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub update: usize,
    pub step: usize,
    pub episodes: usize,
    pub mean_return: Option<f64>,
    pub mean_normalized_return: Option<f64>,
    pub log_std: Vec<f64>,
    #[serde(flatten)]
    pub stats: UpdateStats,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub curve: Vec<CurvePoint>,
    pub progress: Vec<ProgressRecord>,
    pub params: NetworkParams,
}

impl TrainReport {
    /// Mean normalized return of the last `k` training episodes.
    pub fn final_mean_normalized(&self, k: usize) -> Option<f64> {
        let tail = &self.curve[self.curve.len().saturating_sub(k)..];
        (!tail.is_empty()).then(|| tail.iter().map(|c| c.normalized_return).sum::<f64>() / tail.len() as f64)
    }
}

/// Creates `out_dir` and stores the run's config there: the source file's
/// bytes verbatim when given, the serialized config otherwise.
pub fn prepare_output_dir(out_dir: &Path, cfg: &ExperimentConfig, source: Option<&Path>) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let target = out_dir.join(CONFIG_FILE);
    match source {
        Some(src) => {
            let bytes = std::fs::read(src)?;
            std::fs::write(target, bytes)?;
        }
        None => std::fs::write(target, cfg.to_toml_string()?)?,
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(out: &mut impl Write, item: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, item)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Runs PPO for `cfg.ppo.total_steps` environment steps and writes the
/// checkpoint, learning curve and per-update progress into `out_dir`.
pub fn train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    if !out_dir.join(CONFIG_FILE).exists() {
        prepare_output_dir(out_dir, cfg, None)?;
    }
    let modality = cfg.modality;
    let branches = Branches::from(modality);
    let mut params = NetworkParams::init(&cfg.arch, episode_seed(cfg.seed, 0x1217, 0))?;
    let mut adam = Adam::new(params.len(), cfg.ppo.adam);
    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    let mut curve_out = BufWriter::new(File::create(out_dir.join(CURVE_FILE))?);
    let mut progress_out = BufWriter::new(File::create(out_dir.join(PROGRESS_FILE))?);
    let mut curve = Vec::new();
    let mut progress = Vec::new();

    let ppo = &cfg.ppo;
    if ppo.total_steps > 0 {
        let noise = cfg.uses_training_noise().then(|| cfg.noise.clone());
        let mut venv = VecEnv::new(&cfg.env_for(modality), modality, noise, ppo.n_envs, cfg.seed)?;
        let space = ActionSpace::from_ego(&cfg.env.sim.ego);
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed, 0x5eed, 1));
        let mut steps = 0usize;
        let mut per_worker = vec![0u64; ppo.n_envs];
        for u in 0..ppo.n_updates() {
            let remaining = ppo.total_steps - steps;
            let n_steps = ppo.n_steps.min(remaining.div_ceil(ppo.n_envs));
            let mut buffer = collect_rollout(&mut venv, &params, branches, &space, n_steps, &mut rng)?;
            if ppo.reward_scale != 1.0 {
                buffer.transitions.iter_mut().for_each(|t| t.reward *= ppo.reward_scale);
            }
            buffer.compute_gae(ppo.gamma, ppo.gae_lambda);
            let stats = update(&buffer, &mut params, &mut adam, branches, ppo, &mut rng)?;
            steps += n_steps * ppo.n_envs;

            let finished = venv.drain_completed();
            for (worker, summary) in &finished {
                let point = CurvePoint {
                    step: steps,
                    episode: curve.len(),
                    worker: *worker,
                    seed: episode_seed(cfg.seed, *worker, per_worker[*worker]),
                    episode_return: summary.episode_return,
                    normalized_return: summary.normalized_return,
                    length: summary.length,
                    outcome: summary.outcome,
                };
                per_worker[*worker] += 1;
                write_jsonl(&mut curve_out, &point)?;
                curve.push(point);
            }
            let n = finished.len();
            let mean = |f: &dyn Fn(&crate::mdp_env::EpisodeSummary) -> f64| {
                (n > 0).then(|| finished.iter().map(|(_, s)| f(s)).sum::<f64>() / n as f64)
            };
            let record = ProgressRecord {
                update: u,
                step: steps,
                episodes: curve.len(),
                mean_return: mean(&|s| s.episode_return),
                mean_normalized_return: mean(&|s| s.normalized_return),
                log_std: params.log_std().to_vec(),
                stats,
            };
            write_jsonl(&mut progress_out, &record)?;
            progress_out.flush()?;
            curve_out.flush()?;
            progress.push(record);
            if cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0 {
                save_checkpoint(&out_dir.join(format!("checkpoint_{:05}.bin", u + 1)), &params, &adam)?;
            }
        }
    }
    curve_out.flush()?;
    progress_out.flush()?;
    save_checkpoint(&checkpoint, &params, &adam)?;
    Ok(TrainReport { out_dir: out_dir.to_path_buf(), checkpoint, curve, progress, params })
}

pub struct TopologyComparison {
    pub taper: TrainReport,
    pub parallel: TrainReport,
}

/// Trains the same config on the taper and the parallel ramp, into
/// `out_dir/taper` and `out_dir/parallel`.
pub fn compare_topologies(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TopologyComparison> {
    cfg.validate()?;
    let run = |kind: TopologyKind, name: &str| {
        let mut c = cfg.clone();
        c.env.sim.topology = kind;
        train(&c, &out_dir.join(name))
    };
    Ok(TopologyComparison { taper: run(TopologyKind::Taper, "taper")?, parallel: run(TopologyKind::Parallel, "parallel")? })
}
