use std::path::Path;

use crate::mdp_env::{EpisodeSummary, MergeEnv};
use crate::neural::{load_checkpoint, Branches, NetInput, NetworkParams};
use crate::observation::{scale_noise, BsmScales, Modality, ObservationPipeline, StackedObservation};
use crate::ppo::{episode_seed, image_input, ActionSpace};
use crate::traffic_sim::SimState;
use crate::Result;

use super::baseline::KraussEgo;
use super::config::ExperimentConfig;
use super::metrics::MetricsRecord;

/// Seed of the `i`-th evaluation episode; shared by every model evaluated
/// under the same run seed so comparisons are paired.
pub fn eval_seed(run_seed: u64, i: usize) -> u64 {
    episode_seed(run_seed ^ 0x00E7_A1E7_A1E7, 0xEEEE, i as u64)
}

/// Anything that can drive the ego for one episode.
pub trait Controller {
    fn reset(&mut self) {}
    fn act(&mut self, sim: &SimState, obs: &StackedObservation) -> Result<(f64, f64)>;
}

/// Deterministic policy: the Gaussian mean, clamped and mapped to physical units.
pub struct PolicyController<'a> {
    pub params: &'a NetworkParams,
    pub branches: Branches,
    pub space: ActionSpace,
}

impl PolicyController<'_> {
    pub fn mean_action(&self, obs: &StackedObservation) -> Result<Vec<f64>> {
        let bsm = obs.bsm_flat();
        let img = if self.branches.image {
            image_input(&obs.img_flat())
        } else {
            vec![0.0; self.params.arch().image_input_len()]
        };
        Ok(self.params.forward(NetInput { bsm: &bsm, img: &img }, self.branches)?.mean)
    }
}

impl Controller for PolicyController<'_> {
    fn act(&mut self, _sim: &SimState, obs: &StackedObservation) -> Result<(f64, f64)> {
        let a = self.mean_action(obs)?;
        Ok(self.space.to_physical(&a))
    }
}

pub struct BaselineController {
    pub ego: KraussEgo,
    pub d_max: f64,
}

impl Controller for BaselineController {
    fn reset(&mut self) {
        self.ego.reset();
    }

    fn act(&mut self, sim: &SimState, _obs: &StackedObservation) -> Result<(f64, f64)> {
        self.ego.act(sim, self.d_max)
    }
}

/// Runs one episode to termination, calling `on_step` after reset and after
/// every step.
pub fn run_episode(
    env: &mut MergeEnv,
    pipe: &mut ObservationPipeline,
    ctrl: &mut dyn Controller,
    seed: u64,
    mut on_step: Option<&mut dyn FnMut(&MergeEnv) -> Result<()>>,
) -> Result<EpisodeSummary> {
    ctrl.reset();
    let raw = env.reset(seed)?;
    let mut obs = pipe.reset(&raw).clone();
    if let Some(f) = on_step.as_deref_mut() {
        f(env)?;
    }
    loop {
        let sim = env.sim().expect("reset above");
        let (acc, theta) = ctrl.act(sim, &obs)?;
        let res = env.step(acc, theta)?;
        if let Some(f) = on_step.as_deref_mut() {
            f(env)?;
        }
        if res.done {
            return Ok(env.episode_summary());
        }
        obs = pipe.push(&res.raw_state).clone();
    }
}

/// Evaluates `ctrl` on the run's evaluation seeds with observation noise at
/// `noise_percent` of the configured spec.
pub fn evaluate_controller(
    cfg: &ExperimentConfig,
    modality: Modality,
    ctrl: &mut dyn Controller,
    n_episodes: usize,
    noise_percent: f64,
    model: &str,
) -> Result<(MetricsRecord, Vec<EpisodeSummary>)> {
    let env_cfg = cfg.env_for(modality);
    let topology = env_cfg.sim.validate()?;
    let scales = BsmScales::for_topology(&topology, env_cfg.reward.v_max, env_cfg.reward.d_max);
    let noise = scale_noise(&cfg.noise, noise_percent)?;
    let mut env = MergeEnv::new(env_cfg)?;
    let mut episodes = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let seed = eval_seed(cfg.seed, i);
        let mut pipe = ObservationPipeline::new(scales.clone(), modality, Some(noise.clone()), seed ^ 0x6e6f_6973);
        episodes.push(run_episode(&mut env, &mut pipe, ctrl, seed, None)?);
    }
    Ok((MetricsRecord::from_episodes(model, noise_percent, &episodes)?, episodes))
}

pub fn evaluate_params(
    params: &NetworkParams,
    cfg: &ExperimentConfig,
    modality: Modality,
    n_episodes: usize,
    noise_percent: f64,
) -> Result<(MetricsRecord, Vec<EpisodeSummary>)> {
    let mut ctrl = PolicyController {
        params,
        branches: Branches::from(modality),
        space: ActionSpace::from_ego(&cfg.env.sim.ego),
    };
    evaluate_controller(cfg, modality, &mut ctrl, n_episodes, noise_percent, model_name(modality))
}

/// Loads a checkpoint (architecture from `cfg`) and evaluates its mean policy.
pub fn evaluate(checkpoint: &Path, cfg: &ExperimentConfig, n_episodes: usize, noise_percent: f64) -> Result<MetricsRecord> {
    let (params, _) = load_checkpoint(checkpoint, &cfg.arch, cfg.ppo.adam)?;
    Ok(evaluate_params(&params, cfg, cfg.modality, n_episodes, noise_percent)?.0)
}

/// Krauss-ego episodes on explicit environment seeds, e.g. those of the last
/// training episodes for a paired comparison.
pub fn krauss_baseline_on_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<EpisodeSummary>> {
    let mut ctrl = BaselineController { ego: KraussEgo::new(cfg.baseline.clone()), d_max: cfg.env.reward.d_max };
    let env_cfg = cfg.env_for(Modality::BsmOnly);
    let topology = env_cfg.sim.validate()?;
    let scales = BsmScales::for_topology(&topology, env_cfg.reward.v_max, env_cfg.reward.d_max);
    let mut env = MergeEnv::new(env_cfg)?;
    seeds
        .iter()
        .map(|&seed| {
            let mut pipe = ObservationPipeline::new(scales.clone(), Modality::BsmOnly, None, seed);
            run_episode(&mut env, &mut pipe, &mut ctrl, seed, None)
        })
        .collect()
}

pub fn run_krauss_baseline(cfg: &ExperimentConfig, n_episodes: usize) -> Result<(MetricsRecord, Vec<EpisodeSummary>)> {
    let mut ctrl = BaselineController { ego: KraussEgo::new(cfg.baseline.clone()), d_max: cfg.env.reward.d_max };
    evaluate_controller(cfg, Modality::BsmOnly, &mut ctrl, n_episodes, 0.0, "Krauss car following model")
}

pub fn model_name(modality: Modality) -> &'static str {
    match modality {
        Modality::BsmOnly => "SMRL(BSM)",
        Modality::ImageOnly => "SMRL(image)",
        Modality::Multi => "MMRL(BSM+image)",
        Modality::MultiAugmented => "RAMRL",
    }
}
