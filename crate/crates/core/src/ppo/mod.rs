//! Proximal policy optimization: vectorized rollouts, GAE, clipped-surrogate
//! loss with analytic gradients and minibatch Adam updates.

mod gae;
mod loss;
mod rollout;
mod update;

use serde::{Deserialize, Serialize};

pub use gae::{gae, standardize};
pub use loss::{clipped_surrogate, ratio, total_loss, LossTerms, Sample, RATIO_LOG_CLAMP};
pub use rollout::{collect_rollout, episode_seed, image_input, ActionSpace, RolloutBuffer, Transition, VecEnv};
pub use update::{clip_grad_norm, update, UpdateStats};

use crate::neural::AdamConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub n_steps: usize,
    pub n_envs: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub total_steps: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
    /// Multiplier applied to rewards before advantage estimation.
    pub reward_scale: f64,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 3e-4,
            n_steps: 2048,
            n_envs: 4,
            epochs: 10,
            minibatch_size: 64,
            total_steps: 500_000,
            max_grad_norm: Some(0.5),
            normalize_advantages: true,
            reward_scale: 1.0,
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("ppo.{name} must be in (0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("gae_lambda", self.gae_lambda)?;
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config(format!("ppo.clip_eps must be in (0, 1), got {}", self.clip_eps)));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("ppo.reward_scale must be positive"));
        }
        for (name, v) in [("value_coef", self.value_coef), ("entropy_coef", self.entropy_coef), ("lr", self.lr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("ppo.{name} must be finite and non-negative")));
            }
        }
        for (name, v) in [
            ("n_steps", self.n_steps),
            ("n_envs", self.n_envs),
            ("epochs", self.epochs),
            ("minibatch_size", self.minibatch_size),
        ] {
            if v == 0 {
                return Err(Error::config(format!("ppo.{name} must be positive")));
            }
        }
        if let Some(g) = self.max_grad_norm {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config("ppo.max_grad_norm must be positive"));
            }
        }
        let a = &self.adam;
        if !(a.beta1 >= 0.0 && a.beta1 < 1.0 && a.beta2 >= 0.0 && a.beta2 < 1.0 && a.eps > 0.0) {
            return Err(Error::config("ppo.adam: betas must be in [0, 1) and eps positive"));
        }
        Ok(())
    }

    /// Transitions gathered per rollout across all workers.
    pub fn batch_size(&self) -> usize {
        self.n_steps * self.n_envs
    }

    /// Number of rollout/update cycles needed to reach `total_steps`.
    pub fn n_updates(&self) -> usize {
        self.total_steps.div_ceil(self.batch_size())
    }
}

#[cfg(test)]
mod tests;
