//! Episodic MDP around the traffic simulator.

mod reward;

use serde::{Deserialize, Serialize};

pub use reward::{
    compute_stage_reward, reward_comfort, reward_congestion, reward_merge_time, reward_safety,
    reward_smooth_merge, reward_terminal, RewardBreakdown, RewardConfig, RewardInputs,
    SafetySignMode, Stage, MIN_GAP,
};

use crate::observation::{rasterize, ImageFrame, WindowConfig};
use crate::traffic_sim::{ActionReport, Lane, SimConfig, SimState, Zone};
use crate::{Error, Result};

pub const LANE1_SLOTS: usize = 2;
pub const LANE2_SLOTS: usize = 4;
/// Ego plus tracked neighbors.
pub const VEHICLE_SLOTS: usize = 1 + LANE1_SLOTS + LANE2_SLOTS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub sim: SimConfig,
    pub reward: RewardConfig,
    /// Background-only steps simulated before the ego appears.
    pub warmup_steps: usize,
    pub max_steps: usize,
    /// When false the image part of the raw state is left blank.
    pub render_images: bool,
    pub window: WindowConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            reward: RewardConfig::default(),
            warmup_steps: 600,
            max_steps: 3000,
            render_images: true,
            window: WindowConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.reward.validate()?;
        self.window.validate()?;
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be positive"));
        }
        if (self.reward.v_max - self.sim.krauss.v_max).abs() > 1e-12 {
            return Err(Error::config("reward.v_max must equal sim.krauss.v_max"));
        }
        Ok(())
    }
}

/// Kinematics of one vehicle as broadcast in a BSM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleSlot {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub acc: f64,
    /// False for sentinel fill of an untracked slot.
    pub present: bool,
}

impl VehicleSlot {
    pub fn sentinel(x: f64, y: f64) -> Self {
        Self { v: 0.0, x, y, acc: 0.0, present: false }
    }
}

/// Ground-truth state dictionary: ego, tracked Lane-1 and Lane-2 vehicles
/// (front-to-back), and the rendered surveillance frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RawState {
    pub ego: VehicleSlot,
    pub lane1: [VehicleSlot; LANE1_SLOTS],
    pub lane2: [VehicleSlot; LANE2_SLOTS],
    pub img: ImageFrame,
}

impl RawState {
    /// Ego, Lane-1 slots, Lane-2 slots.
    pub fn slots(&self) -> [VehicleSlot; VEHICLE_SLOTS] {
        let mut out = [self.ego; VEHICLE_SLOTS];
        out[1..1 + LANE1_SLOTS].copy_from_slice(&self.lane1);
        out[1 + LANE1_SLOTS..].copy_from_slice(&self.lane2);
        out
    }

    pub fn slots_mut(&mut self) -> impl Iterator<Item = &mut VehicleSlot> {
        std::iter::once(&mut self.ego).chain(self.lane1.iter_mut()).chain(self.lane2.iter_mut())
    }

    pub fn from_sim(sim: &SimState, d_max: f64, img: ImageFrame) -> Result<Self> {
        let ego = sim.ego().ok_or_else(|| Error::contract("no ego vehicle"))?;
        let topo = sim.topology();
        let sentinel_x = topo.road_end() + d_max;
        let slot = |v: &crate::traffic_sim::Vehicle| VehicleSlot {
            v: v.velocity,
            x: v.pos,
            y: sim.global_y(v),
            acc: v.acceleration,
            present: true,
        };
        let mut lane1 = [VehicleSlot::sentinel(sentinel_x, topo.lane_center_y(Lane::Lane1)); LANE1_SLOTS];
        for (dst, v) in lane1.iter_mut().zip(sim.nearest_in_lane(Lane::Lane1, ego.pos, LANE1_SLOTS)) {
            *dst = slot(v);
        }
        let mut lane2 = [VehicleSlot::sentinel(sentinel_x, topo.lane_center_y(Lane::Lane2)); LANE2_SLOTS];
        for (dst, v) in lane2.iter_mut().zip(sim.nearest_in_lane(Lane::Lane2, ego.pos, LANE2_SLOTS)) {
            *dst = slot(v);
        }
        Ok(Self { ego: slot(ego), lane1, lane2, img })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Running,
    Collision,
    Success,
    Timeout,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Running
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub action: ActionReport,
    pub zone: Zone,
    pub d_f: f64,
    pub d_r: f64,
    /// Ego reached the end of its lane without merging.
    pub lane_end: bool,
    pub collision_ids: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub raw_state: RawState,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub outcome: Outcome,
    pub info: StepInfo,
}

/// Per-episode summary row of the episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub outcome: Outcome,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub length: usize,
    /// Seconds from ramp entry to crossing into Lane 2.
    pub merge_time: Option<f64>,
    /// Mean per-step comfort (jerk) reward.
    pub mean_jerk: f64,
    pub collision: bool,
    /// Return divided by length, times 100.
    pub normalized_return: f64,
    /// Mean main-road speed after the merge (whole episode if no merge).
    pub mean_main_velocity: f64,
}

/// One line of the environment-side step log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub seed: u64,
    pub step: usize,
    pub acc_target: f64,
    pub theta_target: f64,
    pub reward: f64,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, Default)]
struct EpisodeAccumulator {
    episode_return: f64,
    jerk_sum: f64,
    velocity_all: (f64, usize),
    velocity_post_merge: (f64, usize),
}

/// Single-ego on-ramp merging environment.
#[derive(Clone, Debug)]
pub struct MergeEnv {
    config: EnvConfig,
    sim: Option<SimState>,
    seed: u64,
    steps: usize,
    ego_spawn_time: f64,
    prev_acc: f64,
    prev_heading: f64,
    outcome: Outcome,
    acc: EpisodeAccumulator,
    log: Option<Vec<StepRecord>>,
}

impl MergeEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            sim: None,
            seed: 0,
            steps: 0,
            ego_spawn_time: 0.0,
            prev_acc: 0.0,
            prev_heading: 0.0,
            outcome: Outcome::Running,
            acc: EpisodeAccumulator::default(),
            log: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn sim(&self) -> Option<&SimState> {
        self.sim.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Starts (or stops) recording a [`StepRecord`] per step.
    pub fn set_logging(&mut self, on: bool) {
        self.log = if on { Some(self.log.take().unwrap_or_default()) } else { None };
    }

    pub fn drain_log(&mut self) -> Vec<StepRecord> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_terminal()
    }

    /// Fresh episode: warmed-up background traffic, ego at the ramp entry.
    pub fn reset(&mut self, seed: u64) -> Result<RawState> {
        let mut sim = SimState::new(self.config.sim.clone(), seed)?;
        for _ in 0..self.config.warmup_steps {
            sim.advance();
        }
        sim.spawn_ego();
        self.ego_spawn_time = sim.time();
        self.sim = Some(sim);
        self.seed = seed;
        self.steps = 0;
        self.prev_acc = 0.0;
        self.prev_heading = 0.0;
        self.outcome = Outcome::Running;
        self.acc = EpisodeAccumulator::default();
        self.observe()
    }

    fn observe(&self) -> Result<RawState> {
        let sim = self.sim.as_ref().ok_or_else(|| Error::contract("environment not reset"))?;
        let img = if self.config.render_images {
            rasterize(sim, &self.config.window)
        } else {
            ImageFrame::blank(self.config.window.width_px, self.config.window.height_px)
        };
        RawState::from_sim(sim, self.config.reward.d_max, img)
    }

    /// Applies `(acc_target, theta_target)` in physical units and advances one tick.
    pub fn step(&mut self, acc_target: f64, theta_target: f64) -> Result<StepResult> {
        if self.outcome.is_terminal() {
            return Err(Error::contract("step called after episode end; call reset first"));
        }
        let cfg = &self.config;
        let sim = self.sim.as_mut().ok_or_else(|| Error::contract("environment not reset"))?;
        let action = sim.apply_ego_action(acc_target, theta_target)?;
        sim.advance();
        self.steps += 1;

        let collision = sim.detect_collision();
        let lane_end = sim.ego_at_lane_end();
        let ego = sim.ego().expect("ego spawned at reset").clone();
        let outcome = if collision.collided || lane_end {
            Outcome::Collision
        } else if sim.ego_merged() && ego.pos >= sim.topology().merge_end {
            Outcome::Success
        } else if self.steps >= cfg.max_steps {
            Outcome::Timeout
        } else {
            Outcome::Running
        };

        let dt = sim.dt();
        let zone = sim.zone_of()?;
        let projection = sim.project_ego(cfg.reward.d_max)?;
        let v_max = cfg.reward.v_max;
        let inputs = RewardInputs {
            zone,
            d_f: projection.d_f,
            d_r: projection.d_r,
            jerk: (ego.acceleration - self.prev_acc) / dt,
            time_ego: self.steps as f64,
            v_ego: ego.velocity,
            theta_rate: (ego.heading - self.prev_heading) / dt,
            lane1_mean_v: sim.lane_mean_speed(Lane::Lane1).unwrap_or(v_max),
            lane2_mean_v: sim.lane_mean_speed(Lane::Lane2).unwrap_or(v_max),
            outcome,
        };
        let reward = compute_stage_reward(&inputs, &cfg.reward);
        self.prev_acc = ego.acceleration;
        self.prev_heading = ego.heading;

        let main_speeds: Vec<f64> = sim
            .background()
            .map(|v| v.velocity)
            .chain(sim.ego_merged().then_some(ego.velocity))
            .collect();
        if !main_speeds.is_empty() {
            let mean = main_speeds.iter().sum::<f64>() / main_speeds.len() as f64;
            self.acc.velocity_all.0 += mean;
            self.acc.velocity_all.1 += 1;
            if sim.ego_merged() {
                self.acc.velocity_post_merge.0 += mean;
                self.acc.velocity_post_merge.1 += 1;
            }
        }
        self.acc.episode_return += reward.total;
        self.acc.jerk_sum += reward.r_j;
        self.outcome = outcome;
        if let Some(log) = self.log.as_mut() {
            log.push(StepRecord {
                seed: self.seed,
                step: self.steps,
                acc_target,
                theta_target,
                reward: reward.total,
                outcome,
            });
        }

        let raw_state = self.observe()?;
        Ok(StepResult {
            raw_state,
            reward,
            done: outcome.is_terminal(),
            outcome,
            info: StepInfo {
                action,
                zone,
                d_f: projection.d_f,
                d_r: projection.d_r,
                lane_end,
                collision_ids: collision.ids,
            },
        })
    }

    /// Summary of the current episode so far (final once `is_done`).
    pub fn episode_summary(&self) -> EpisodeSummary {
        let length = self.steps;
        let merge_time = self
            .sim
            .as_ref()
            .and_then(|s| s.merged_at())
            .map(|t| t - self.ego_spawn_time);
        let (vsum, vn) = if self.acc.velocity_post_merge.1 > 0 {
            self.acc.velocity_post_merge
        } else {
            self.acc.velocity_all
        };
        let per_step = |x: f64| if length > 0 { x / length as f64 } else { 0.0 };
        EpisodeSummary {
            seed: self.seed,
            outcome: self.outcome,
            episode_return: self.acc.episode_return,
            length,
            merge_time,
            mean_jerk: per_step(self.acc.jerk_sum),
            collision: self.outcome == Outcome::Collision,
            normalized_return: per_step(self.acc.episode_return) * 100.0,
            mean_main_velocity: if vn > 0 { vsum / vn as f64 } else { 0.0 },
        }
    }
}
