use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp_env::{EnvConfig, EpisodeSummary, MergeEnv, Outcome};
use crate::neural::{Branches, NetInput, NetworkParams};
use crate::observation::{BsmScales, Modality, NoiseSpec, ObservationPipeline, StackedObservation};
use crate::traffic_sim::EgoConfig;
use crate::{Error, Result};

use super::gae::gae;

/// Maps the policy's normalized actions in [-1, 1]^2 to physical targets.
/// Zero maps to zero acceleration and zero heading; each half-range scales
/// to its own bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub acc_min: f64,
    pub acc_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl ActionSpace {
    pub fn from_ego(ego: &EgoConfig) -> Self {
        Self { acc_min: ego.acc_min, acc_max: ego.acc_max, theta_min: ego.theta_min, theta_max: ego.theta_max }
    }

    fn scale(u: f64, lo: f64, hi: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        if u >= 0.0 {
            u * hi
        } else {
            -u * lo
        }
    }

    /// `(acc, theta)` after clamping each component to [-1, 1].
    pub fn to_physical(&self, action: &[f64]) -> (f64, f64) {
        (
            Self::scale(action[0], self.acc_min, self.acc_max),
            Self::scale(action[1], self.theta_min, self.theta_max),
        )
    }
}

/// u8 frame stack to network units in [0, 1].
pub fn image_input(img: &[u8]) -> Vec<f64> {
    img.iter().map(|&p| p as f64 / 255.0).collect()
}

/// Deterministic seed of worker `env`'s `k`-th episode.
pub fn episode_seed(base: u64, env: usize, k: u64) -> u64 {
    let mut z = base ^ ((env as u64) << 40) ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent workers, each with its own environment and observation pipeline.
/// Finished episodes reset immediately with the worker's next seed.
#[derive(Debug)]
pub struct VecEnv {
    envs: Vec<MergeEnv>,
    pipes: Vec<ObservationPipeline>,
    obs: Vec<StackedObservation>,
    truncated: Vec<Option<StackedObservation>>,
    episode_index: Vec<u64>,
    base_seed: u64,
    completed: Vec<(usize, EpisodeSummary)>,
    modality: Modality,
}

impl VecEnv {
    pub fn new(config: &EnvConfig, modality: Modality, noise: Option<NoiseSpec>, n_envs: usize, seed: u64) -> Result<Self> {
        if n_envs == 0 {
            return Err(Error::config("n_envs must be positive"));
        }
        let topology = config.sim.validate()?;
        let scales = BsmScales::for_topology(&topology, config.reward.v_max, config.reward.d_max);
        let mut envs = Vec::with_capacity(n_envs);
        let mut pipes = Vec::with_capacity(n_envs);
        let mut obs = Vec::with_capacity(n_envs);
        for e in 0..n_envs {
            let mut env = MergeEnv::new(config.clone())?;
            let mut pipe = ObservationPipeline::new(scales.clone(), modality, noise.clone(), episode_seed(seed ^ 0x6f62_7365, e, u64::MAX));
            let raw = env.reset(episode_seed(seed, e, 0))?;
            obs.push(pipe.reset(&raw).clone());
            envs.push(env);
            pipes.push(pipe);
        }
        Ok(Self { envs, pipes, obs, truncated: vec![None; n_envs], episode_index: vec![0; n_envs], base_seed: seed, completed: Vec::new(), modality })
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn observation(&self, e: usize) -> &StackedObservation {
        &self.obs[e]
    }

    pub fn truncated_observation(&self, e: usize) -> Option<&StackedObservation> {
        self.truncated[e].as_ref()
    }

    pub fn env_mut(&mut self, e: usize) -> &mut MergeEnv {
        &mut self.envs[e]
    }

    /// Steps worker `e` with a physical action; returns `(reward, done)`.
    /// After a timeout, [`VecEnv::truncated_observation`] holds the final
    /// observation until the next step of that worker.
    pub fn step(&mut self, e: usize, acc: f64, theta: f64) -> Result<(f64, bool)> {
        let res = self.envs[e].step(acc, theta)?;
        self.truncated[e] = None;
        if res.done {
            if res.outcome == Outcome::Timeout {
                self.truncated[e] = Some(self.pipes[e].push(&res.raw_state).clone());
            }
            self.completed.push((e, self.envs[e].episode_summary()));
            self.episode_index[e] += 1;
            let raw = self.envs[e].reset(episode_seed(self.base_seed, e, self.episode_index[e]))?;
            self.obs[e] = self.pipes[e].reset(&raw).clone();
        } else {
            self.obs[e] = self.pipes[e].push(&res.raw_state).clone();
        }
        Ok((res.reward.total, res.done))
    }

    /// Episodes finished since the last call, tagged with their worker.
    pub fn drain_completed(&mut self) -> Vec<(usize, EpisodeSummary)> {
        std::mem::take(&mut self.completed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub bsm: Vec<f64>,
    /// Stacked u8 frames; empty when the image branch is off.
    pub img: Vec<u8>,
    /// Pre-clamp normalized action.
    pub action: Vec<f64>,
    pub log_prob_old: f64,
    pub value_old: f64,
    pub reward: f64,
    pub done: bool,
    /// Value of the final observation when the episode ended by timeout.
    pub timeout_value: Option<f64>,
}

/// `n_steps x n_envs` transitions, indexed `t * n_envs + e`.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBuffer {
    pub n_steps: usize,
    pub n_envs: usize,
    pub transitions: Vec<Transition>,
    pub last_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn get(&self, t: usize, e: usize) -> &Transition {
        &self.transitions[t * self.n_envs + e]
    }

    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) {
        let n = self.len();
        self.advantages = vec![0.0; n];
        self.returns = vec![0.0; n];
        for e in 0..self.n_envs {
            let col: Vec<&Transition> = (0..self.n_steps).map(|t| self.get(t, e)).collect();
            let rewards: Vec<f64> = col.iter().map(|x| x.reward + x.timeout_value.map_or(0.0, |v| gamma * v)).collect();
            let values: Vec<f64> = col.iter().map(|x| x.value_old).collect();
            let dones: Vec<bool> = col.iter().map(|x| x.done).collect();
            let (adv, ret) = gae(&rewards, &values, &dones, self.last_values[e], gamma, lambda);
            for t in 0..self.n_steps {
                self.advantages[t * self.n_envs + e] = adv[t];
                self.returns[t * self.n_envs + e] = ret[t];
            }
        }
    }

    pub fn has_advantages(&self) -> bool {
        self.advantages.len() == self.len() && self.returns.len() == self.len()
    }
}

fn net_inputs(obs: &StackedObservation, branches: Branches, params: &NetworkParams) -> (Vec<f64>, Vec<u8>, Vec<f64>) {
    let bsm = obs.bsm_flat();
    if branches.image {
        let img = obs.img_flat();
        let img_f = image_input(&img);
        (bsm, img, img_f)
    } else {
        (bsm, Vec::new(), vec![0.0; params.arch().image_input_len()])
    }
}

/// Runs every worker for `n_steps` under a fixed parameter snapshot, sampling
/// actions from the Gaussian policy. GAE is not computed here.
pub fn collect_rollout<R: Rng + ?Sized>(
    venv: &mut VecEnv,
    params: &NetworkParams,
    branches: Branches,
    space: &ActionSpace,
    n_steps: usize,
    rng: &mut R,
) -> Result<RolloutBuffer> {
    let n_envs = venv.n_envs();
    let mut transitions = Vec::with_capacity(n_steps * n_envs);
    for _ in 0..n_steps {
        for e in 0..n_envs {
            let (bsm, img, img_f) = net_inputs(venv.observation(e), branches, params);
            let fp = params.forward(NetInput { bsm: &bsm, img: &img_f }, branches)?;
            let policy = params.policy(&fp);
            let action = policy.sample(rng);
            let log_prob_old = policy.log_prob(&action);
            let (acc, theta) = space.to_physical(&action);
            let (reward, done) = venv.step(e, acc, theta)?;
            let timeout_value = match venv.truncated_observation(e) {
                Some(obs) => {
                    let (bsm, _, img_f) = net_inputs(obs, branches, params);
                    Some(params.forward(NetInput { bsm: &bsm, img: &img_f }, branches)?.value)
                }
                None => None,
            };
            transitions.push(Transition { bsm, img, action, log_prob_old, value_old: fp.value, reward, done, timeout_value });
        }
    }
    let mut last_values = Vec::with_capacity(n_envs);
    for e in 0..n_envs {
        let (bsm, _, img_f) = net_inputs(venv.observation(e), branches, params);
        last_values.push(params.forward(NetInput { bsm: &bsm, img: &img_f }, branches)?.value);
    }
    Ok(RolloutBuffer { n_steps, n_envs, transitions, last_values, advantages: Vec::new(), returns: Vec::new() })
}
