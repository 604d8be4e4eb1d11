use serde::{Deserialize, Serialize};

use crate::traffic_sim::Zone;
use crate::{Error, Result};

use super::Outcome;

/// Sign convention for the preceding-gap term of the safety reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetySignMode {
    /// `2 - (d_f/d_max)^-a_f + (d_r/d_max)^-a_r`, literally as printed.
    AsWritten,
    /// Both gaps penalized: `2 - (d_f/d_max)^-a_f - (d_r/d_max)^-a_r`.
    BothPenalize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha_f: f64,
    pub alpha_r: f64,
    pub alpha_j: f64,
    /// Per step since ramp entry.
    pub alpha_time: f64,
    pub alpha_v: f64,
    pub alpha_o: f64,
    pub alpha_s_l1: f64,
    pub alpha_s_l2: f64,
    pub j_max: f64,
    pub v_max: f64,
    pub d_max: f64,
    pub a_collision: f64,
    pub a_success: f64,
    pub safety_sign_mode: SafetySignMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha_f: 0.5,
            alpha_r: 0.5,
            alpha_j: 0.8,
            alpha_time: 0.002,
            alpha_v: 0.005,
            alpha_o: 0.1,
            alpha_s_l1: 0.0,
            alpha_s_l2: 1.0,
            j_max: 2.6,
            v_max: 13.89,
            d_max: 50.0,
            a_collision: 10.0,
            a_success: 10.0,
            safety_sign_mode: SafetySignMode::BothPenalize,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.j_max > 0.0 && self.v_max > 0.0 && self.d_max > 0.0) {
            return Err(Error::config("j_max, v_max and d_max must be positive"));
        }
        if !(self.a_collision > 0.0 && self.a_success > 0.0) {
            return Err(Error::config("a_collision and a_success must be positive"));
        }
        let weights = [
            self.alpha_f,
            self.alpha_r,
            self.alpha_j,
            self.alpha_time,
            self.alpha_v,
            self.alpha_o,
            self.alpha_s_l1,
            self.alpha_s_l2,
        ];
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("reward weights must be finite"));
        }
        Ok(())
    }
}

/// Gaps at or below zero are lifted to this floor before exponentiation.
pub const MIN_GAP: f64 = 0.1;

pub fn reward_safety(d_f: f64, d_r: f64, cfg: &RewardConfig) -> f64 {
    let d_f = d_f.max(MIN_GAP);
    let d_r = d_r.max(MIN_GAP);
    let follow = (d_f / cfg.d_max).powf(-cfg.alpha_f);
    let lead = (d_r / cfg.d_max).powf(-cfg.alpha_r);
    match cfg.safety_sign_mode {
        SafetySignMode::BothPenalize => 2.0 - follow - lead,
        SafetySignMode::AsWritten => 2.0 - follow + lead,
    }
}

pub fn reward_comfort(jerk: f64, cfg: &RewardConfig) -> f64 {
    -cfg.alpha_j * jerk.abs() / cfg.j_max
}

pub fn reward_merge_time(time_ego: f64, v_ego: f64, cfg: &RewardConfig) -> f64 {
    -cfg.alpha_time * time_ego + cfg.alpha_v * v_ego
}

pub fn reward_smooth_merge(theta_rate: f64, cfg: &RewardConfig) -> f64 {
    -cfg.alpha_o * theta_rate.abs()
}

pub fn reward_congestion(lane1_mean_v: f64, lane2_mean_v: f64, cfg: &RewardConfig) -> f64 {
    cfg.alpha_s_l2 * (lane2_mean_v / cfg.v_max) + cfg.alpha_s_l1 * (lane1_mean_v / cfg.v_max)
}

pub fn reward_terminal(outcome: Outcome, cfg: &RewardConfig) -> f64 {
    match outcome {
        Outcome::Collision => -cfg.a_collision,
        Outcome::Success => cfg.a_success,
        Outcome::Running | Outcome::Timeout => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Stage1,
    Stage2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_d: f64,
    pub r_j: f64,
    pub r_time: f64,
    pub r_o: f64,
    pub r_c: f64,
    pub r_end: f64,
    pub stage: Stage,
    pub total: f64,
}

/// Everything the reward reads from one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardInputs {
    pub zone: Zone,
    pub d_f: f64,
    pub d_r: f64,
    pub jerk: f64,
    /// Steps since the ego entered the ramp.
    pub time_ego: f64,
    pub v_ego: f64,
    pub theta_rate: f64,
    pub lane1_mean_v: f64,
    pub lane2_mean_v: f64,
    pub outcome: Outcome,
}

/// Stage 1 (gap-selection zone) sums safety, comfort and time terms; stage 2
/// adds smooth-merge, congestion and terminal terms.
pub fn compute_stage_reward(inputs: &RewardInputs, cfg: &RewardConfig) -> RewardBreakdown {
    let r_d = reward_safety(inputs.d_f, inputs.d_r, cfg);
    let r_j = reward_comfort(inputs.jerk, cfg);
    let r_time = reward_merge_time(inputs.time_ego, inputs.v_ego, cfg);
    if inputs.zone == Zone::GapSelection {
        RewardBreakdown {
            r_d,
            r_j,
            r_time,
            r_o: 0.0,
            r_c: 0.0,
            r_end: 0.0,
            stage: Stage::Stage1,
            total: r_d + r_j + r_time,
        }
    } else {
        let r_o = reward_smooth_merge(inputs.theta_rate, cfg);
        let r_c = reward_congestion(inputs.lane1_mean_v, inputs.lane2_mean_v, cfg);
        let r_end = reward_terminal(inputs.outcome, cfg);
        RewardBreakdown {
            r_d,
            r_j,
            r_time,
            r_o,
            r_c,
            r_end,
            stage: Stage::Stage2,
            total: r_d + r_j + r_o + r_c + r_end + r_time,
        }
    }
}
