use crate::traffic_sim::{safe_speed_for_gap, SimState};
use crate::{Error, Result};

use super::config::BaselineConfig;

/// Scripted merging vehicle: Krauss longitudinal control plus a fixed merge
/// rule. Until it commits, the ego follows a virtual stopped obstacle
/// `stop_margin` short of the lane end; inside the merge zone it steers into
/// Lane 2 once both projected gaps reach the threshold and neither the Lane-2
/// follower nor the ego would need more than one step of hard braking, then
/// follows the Lane-2 leader and re-centers.
#[derive(Clone, Debug)]
pub struct KraussEgo {
    cfg: BaselineConfig,
    committed: bool,
}

impl KraussEgo {
    pub fn new(cfg: BaselineConfig) -> Self {
        Self { cfg, committed: false }
    }

    pub fn reset(&mut self) {
        self.committed = false;
    }

    pub fn committed(&self) -> bool {
        self.committed
    }

    /// `(acceleration, heading)` targets for the next step.
    pub fn act(&mut self, sim: &SimState, d_max: f64) -> Result<(f64, f64)> {
        let ego = sim.ego().ok_or_else(|| Error::contract("no ego vehicle"))?;
        let topo = sim.topology();
        let params = &sim.config().krauss;
        let dt = sim.dt();
        let ego_cfg = &sim.config().ego;
        let merged = sim.ego_merged();
        let proj = sim.project_ego(d_max)?;

        if !merged && !self.committed && ego.pos >= topo.merge_start && proj.d_f >= self.cfg.gap_threshold && proj.d_r >= self.cfg.gap_threshold {
            let slack = params.max_decel * dt;
            let rear_ok = proj
                .first_following
                .as_ref()
                .is_none_or(|f| safe_speed_for_gap(f.velocity, ego.velocity, proj.d_f, params) >= f.velocity - slack);
            let front_ok = proj
                .first_preceding
                .as_ref()
                .is_none_or(|l| safe_speed_for_gap(ego.velocity, l.velocity, proj.d_r, params) >= ego.velocity - slack);
            self.committed = rear_ok && front_ok;
        }

        let mut v_safe = params.v_max;
        if merged || self.committed {
            if let Some(lead) = &proj.first_preceding {
                let gap = (lead.rear() - ego.pos).max(0.0);
                v_safe = v_safe.min(safe_speed_for_gap(ego.velocity, lead.velocity, gap, params));
            }
        }
        if !merged && !self.committed {
            let stop_line = topo.merge_end - self.cfg.stop_margin;
            let gap = (stop_line - ego.pos).max(0.0);
            v_safe = v_safe.min(safe_speed_for_gap(ego.velocity, 0.0, gap, params));
        }
        let v_next = (ego.velocity + params.max_accel * dt).min(params.v_max).min(v_safe);
        let acc = ((v_next - ego.velocity) / dt).clamp(ego_cfg.acc_min, ego_cfg.acc_max);

        let theta = if merged {
            (-self.cfg.lateral_gain * ego.lateral).clamp(ego_cfg.theta_min, ego_cfg.theta_max)
        } else if self.committed {
            ego_cfg.theta_max
        } else {
            0.0
        };
        Ok((acc, theta))
    }
}
