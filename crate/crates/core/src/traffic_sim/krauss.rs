use serde::{Deserialize, Serialize};

use super::Vehicle;
use crate::{Error, Result};

/// Krauss car-following parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KraussParams {
    /// Maximum acceleration `a` (m/s²).
    pub max_accel: f64,
    /// Maximum deceleration `b` (m/s²).
    pub max_decel: f64,
    /// Driver reaction time `tau` (s).
    pub reaction_time: f64,
    /// Driver imperfection `sigma` in [0, 1].
    pub imperfection: f64,
    /// Speed limit (m/s).
    pub v_max: f64,
}

impl Default for KraussParams {
    fn default() -> Self {
        Self {
            max_accel: 2.6,
            max_decel: 4.5,
            reaction_time: 1.0,
            imperfection: 0.5,
            v_max: 13.89,
        }
    }
}

impl KraussParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_accel > 0.0 && self.max_decel > 0.0 && self.reaction_time > 0.0) {
            return Err(Error::config("Krauss a, b and tau must be positive"));
        }
        if !(0.0..=1.0).contains(&self.imperfection) {
            return Err(Error::config(format!(
                "Krauss imperfection must lie in [0, 1], got {}",
                self.imperfection
            )));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::config("v_max must be positive"));
        }
        Ok(())
    }
}

/// Bumper-to-bumper gap from `follower`'s front to `leader`'s rear.
pub fn bumper_gap(follower: &Vehicle, leader: &Vehicle) -> f64 {
    leader.pos - leader.length - follower.pos
}

/// Safe speed `v_l + (g - v_l*tau) / ((v_l + v_f) / (2b) + tau)`, clamped at 0.
pub fn safe_speed_for_gap(v_follower: f64, v_leader: f64, gap: f64, params: &KraussParams) -> f64 {
    let tau = params.reaction_time;
    let denom = (v_leader + v_follower) / (2.0 * params.max_decel) + tau;
    (v_leader + (gap - v_leader * tau) / denom).max(0.0)
}

pub fn krauss_safe_speed(follower: &Vehicle, leader: &Vehicle, params: &KraussParams) -> Result<f64> {
    let gap = bumper_gap(follower, leader);
    if gap < 0.0 {
        return Err(Error::NegativeGap { follower: follower.id, leader: leader.id, gap });
    }
    Ok(safe_speed_for_gap(follower.velocity, leader.velocity, gap, params))
}
