//! Seeded microscopic simulation of a two-lane highway with an on-ramp.
//!
//! Background traffic on Lane 1 and Lane 2 follows the Krauss car-following
//! rule; a single ego vehicle on the ramp is driven externally through
//! [`SimState::apply_ego_action`].

mod krauss;
mod topology;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

pub use krauss::{bumper_gap, krauss_safe_speed, safe_speed_for_gap, KraussParams};
pub use topology::{GeometryConfig, Lane, RoadTopology, TopologyKind};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub lane: Lane,
    /// Front bumper position (m).
    pub pos: f64,
    /// Offset from the center of `lane` (m, positive toward Lane 1).
    pub lateral: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub heading: f64,
    pub length: f64,
    pub is_ego: bool,
}

impl Vehicle {
    pub fn new(id: u32, lane: Lane, pos: f64, velocity: f64, length: f64) -> Self {
        Self {
            id,
            lane,
            pos,
            lateral: 0.0,
            velocity,
            acceleration: 0.0,
            heading: 0.0,
            length,
            is_ego: false,
        }
    }

    pub fn rear(&self) -> f64 {
        self.pos - self.length
    }
}

/// Bounds and start condition of the externally controlled vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoConfig {
    pub acc_min: f64,
    pub acc_max: f64,
    /// Steering bounds in radians.
    pub theta_min: f64,
    pub theta_max: f64,
    pub initial_speed: f64,
}

impl Default for EgoConfig {
    fn default() -> Self {
        Self {
            acc_min: -4.5,
            acc_max: 2.6,
            theta_min: -10f64.to_radians(),
            theta_max: 10f64.to_radians(),
            initial_speed: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub topology: TopologyKind,
    pub geometry: GeometryConfig,
    pub krauss: KraussParams,
    /// Background demand in vehicles per hour per main lane.
    pub flow_rate: f64,
    pub dt: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Minimum free space behind the last vehicle before a new one may enter.
    pub min_insert_gap: f64,
    pub ego: EgoConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            topology: TopologyKind::Taper,
            geometry: GeometryConfig::default(),
            krauss: KraussParams::default(),
            flow_rate: 1440.0,
            dt: 0.1,
            vehicle_length: 5.0,
            vehicle_width: 1.8,
            min_insert_gap: 2.5,
            ego: EgoConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<RoadTopology> {
        self.krauss.validate()?;
        if !(self.flow_rate >= 0.0) || !self.flow_rate.is_finite() {
            return Err(Error::config(format!("flow_rate must be >= 0, got {}", self.flow_rate)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return Err(Error::config("vehicle dimensions must be positive"));
        }
        if self.vehicle_width >= self.geometry.lane_width {
            return Err(Error::config("vehicle_width must be below lane_width"));
        }
        if !(self.min_insert_gap >= 0.0) {
            return Err(Error::config("min_insert_gap must be >= 0"));
        }
        let ego = &self.ego;
        if !(ego.acc_min < ego.acc_max) || !(ego.theta_min < ego.theta_max) {
            return Err(Error::config("ego action bounds must satisfy min < max"));
        }
        if !(0.0..=self.krauss.v_max).contains(&ego.initial_speed) {
            return Err(Error::config("ego initial_speed must lie in [0, v_max]"));
        }
        RoadTopology::build(self.topology, &self.geometry)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    GapSelection,
    Merging,
    PostMerge,
}

impl RoadTopology {
    pub fn zone_at(&self, pos: f64, merged: bool) -> Zone {
        if pos < self.merge_start {
            Zone::GapSelection
        } else if pos < self.merge_end && !merged {
            Zone::Merging
        } else {
            Zone::PostMerge
        }
    }
}

/// Ego projected onto Lane 2 and its two Lane-2 neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub proj_pos: f64,
    /// Distance to the end of the merge zone.
    pub d_m: f64,
    pub first_preceding: Option<Vehicle>,
    pub first_following: Option<Vehicle>,
    /// Bumper gap to the first following vehicle, capped at the sensing range.
    pub d_f: f64,
    /// Bumper gap to the first preceding vehicle, capped at the sensing range.
    pub d_r: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CollisionReport {
    pub collided: bool,
    pub ids: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActionReport {
    pub acc_clamped: bool,
    pub theta_clamped: bool,
    /// Steering was requested inside the gap-selection zone and ignored.
    pub theta_masked: bool,
    pub applied_acc: f64,
    pub applied_theta: f64,
}

#[derive(Clone, Debug)]
struct ArrivalProcess {
    next_arrival: f64,
    pending: u32,
    spawned: u64,
}

/// Full ground-truth world state.
#[derive(Clone, Debug)]
pub struct SimState {
    config: SimConfig,
    topology: RoadTopology,
    /// Background vehicles of Lane 1 and Lane 2, front-most first.
    lanes: [Vec<Vehicle>; 2],
    ego: Option<Vehicle>,
    merged_at: Option<f64>,
    step_count: u64,
    rng: ChaCha8Rng,
    next_id: u32,
    arrivals: [ArrivalProcess; 2],
}

const MAIN_LANES: [Lane; 2] = [Lane::Lane1, Lane::Lane2];

fn lane_index(lane: Lane) -> Option<usize> {
    match lane {
        Lane::Lane1 => Some(0),
        Lane::Lane2 => Some(1),
        _ => None,
    }
}

fn intervals_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

impl SimState {
    pub fn new(config: SimConfig, seed: u64) -> Result<Self> {
        let topology = config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rate = config.flow_rate / 3600.0;
        let mut first_arrival = || {
            if rate > 0.0 {
                Exp::new(rate).expect("positive rate").sample(&mut rng)
            } else {
                f64::INFINITY
            }
        };
        let arrivals = [
            ArrivalProcess { next_arrival: first_arrival(), pending: 0, spawned: 0 },
            ArrivalProcess { next_arrival: first_arrival(), pending: 0, spawned: 0 },
        ];
        Ok(Self {
            config,
            topology,
            lanes: [Vec::new(), Vec::new()],
            ego: None,
            merged_at: None,
            step_count: 0,
            rng,
            next_id: 0,
            arrivals,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn topology(&self) -> &RoadTopology {
        &self.topology
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.config.dt
    }

    pub fn ego(&self) -> Option<&Vehicle> {
        self.ego.as_ref()
    }

    pub fn ego_merged(&self) -> bool {
        self.merged_at.is_some()
    }

    /// Simulation time at which the ego crossed into Lane 2.
    pub fn merged_at(&self) -> Option<f64> {
        self.merged_at
    }

    /// Background vehicles of a main lane, front-most first. Empty for ramp lanes.
    pub fn lane_vehicles(&self, lane: Lane) -> &[Vehicle] {
        match lane_index(lane) {
            Some(i) => &self.lanes[i],
            None => &[],
        }
    }

    pub fn background(&self) -> impl Iterator<Item = &Vehicle> {
        self.lanes.iter().flatten()
    }

    /// Ego (if spawned) followed by all background vehicles.
    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.ego.iter().chain(self.background())
    }

    pub fn spawned_count(&self, lane: Lane) -> u64 {
        lane_index(lane).map_or(0, |i| self.arrivals[i].spawned)
    }

    pub fn global_y(&self, vehicle: &Vehicle) -> f64 {
        self.topology.lane_center_y(vehicle.lane) + vehicle.lateral
    }

    /// Mean background speed on a main lane; `None` when the lane is empty.
    pub fn lane_mean_speed(&self, lane: Lane) -> Option<f64> {
        let vehicles = self.lane_vehicles(lane);
        if vehicles.is_empty() {
            None
        } else {
            Some(vehicles.iter().map(|v| v.velocity).sum::<f64>() / vehicles.len() as f64)
        }
    }

    /// Places a background vehicle, keeping the lane ordered front-first.
    pub fn place_vehicle(&mut self, lane: Lane, pos: f64, velocity: f64) -> Result<u32> {
        let idx = lane_index(lane)
            .ok_or_else(|| Error::contract("background vehicles live on Lane 1 or Lane 2"))?;
        let id = self.next_id;
        self.next_id += 1;
        let vehicle = Vehicle::new(id, lane, pos, velocity, self.config.vehicle_length);
        let lane_vec = &mut self.lanes[idx];
        let at = lane_vec.partition_point(|v| v.pos > pos);
        lane_vec.insert(at, vehicle);
        Ok(id)
    }

    /// Puts the ego at the ramp entry, centered in the ramp lane.
    pub fn spawn_ego(&mut self) {
        self.spawn_ego_at(self.topology.ramp_entry, self.config.ego.initial_speed);
    }

    pub fn spawn_ego_at(&mut self, pos: f64, velocity: f64) {
        let id = self.next_id;
        self.next_id += 1;
        let lane = self.topology.entry_lane_at(pos);
        let mut ego = Vehicle::new(id, lane, pos, velocity, self.config.vehicle_length);
        ego.is_ego = true;
        self.ego = Some(ego);
        self.merged_at = None;
    }

    pub fn zone_of(&self) -> Result<Zone> {
        let ego = self.ego.as_ref().ok_or_else(|| Error::contract("no ego vehicle"))?;
        Ok(self.topology.zone_at(ego.pos, self.ego_merged()))
    }

    /// The ego overlaps Lane 2 laterally and acts as a leader for Lane-2 traffic.
    pub fn ego_occupies_lane2(&self) -> bool {
        self.ego.as_ref().is_some_and(|ego| {
            let y = self.global_y(ego);
            let half_w = self.config.vehicle_width / 2.0;
            let half_lane = self.topology.lane_width / 2.0;
            intervals_overlap((y - half_w, y + half_w), (-half_lane, half_lane))
        })
    }

    /// Merging vehicle reached the end of its lane without entering Lane 2.
    pub fn ego_at_lane_end(&self) -> bool {
        self.ego
            .as_ref()
            .is_some_and(|ego| !self.ego_merged() && ego.pos >= self.topology.merge_end)
    }

    /// Advances background traffic by one Krauss step and the clock by `dt`.
    ///
    /// New speeds are computed synchronously from the pre-step state:
    /// `max(0, min(v + a*dt, v_max, v_safe) - sigma*a*dt*u)`. One uniform draw
    /// is taken per vehicle, Lane 1 front-to-back then Lane 2 front-to-back.
    pub fn krauss_step(&mut self) {
        let params = self.config.krauss.clone();
        let dt = self.config.dt;
        let ego_leader = if self.ego_occupies_lane2() { self.ego.clone() } else { None };
        for lane_idx in 0..2 {
            let n = self.lanes[lane_idx].len();
            let mut new_speeds = Vec::with_capacity(n);
            for i in 0..n {
                let vehicle = &self.lanes[lane_idx][i];
                let mut leader = if i > 0 { Some(&self.lanes[lane_idx][i - 1]) } else { None };
                if lane_idx == 1 {
                    if let Some(ego) = ego_leader.as_ref().filter(|e| e.pos > vehicle.pos) {
                        if leader.map_or(true, |l| ego.pos < l.pos) {
                            leader = Some(ego);
                        }
                    }
                }
                let v_safe = match leader {
                    // A negative gap means a collision is already on record.
                    Some(l) => krauss_safe_speed(vehicle, l, &params).unwrap_or(0.0),
                    None => f64::INFINITY,
                };
                let desired = (vehicle.velocity + params.max_accel * dt)
                    .min(params.v_max)
                    .min(v_safe);
                let u: f64 = self.rng.gen();
                let dawdle = params.imperfection * params.max_accel * dt * u;
                new_speeds.push((desired - dawdle).max(0.0));
            }
            for (vehicle, v_new) in self.lanes[lane_idx].iter_mut().zip(new_speeds) {
                vehicle.acceleration = (v_new - vehicle.velocity) / dt;
                vehicle.velocity = v_new;
                vehicle.pos += v_new * dt;
            }
        }
        self.step_count += 1;
    }

    /// Exponential-headway arrivals at the start of each main lane, at most one
    /// insertion per lane per call and only when the entry is Krauss-safe.
    /// Vehicles whose rear has passed the road end are removed.
    pub fn spawn_traffic(&mut self) {
        let road_end = self.topology.road_end();
        for lane in &mut self.lanes {
            while lane.first().is_some_and(|v| v.rear() > road_end) {
                lane.remove(0);
            }
        }
        if self.config.flow_rate <= 0.0 {
            return;
        }
        let exp = Exp::new(self.config.flow_rate / 3600.0).expect("positive rate");
        let now = self.time();
        let params = &self.config.krauss;
        let entry = 0.0;
        for (idx, lane) in MAIN_LANES.into_iter().enumerate() {
            let arrival = &mut self.arrivals[idx];
            while arrival.next_arrival <= now {
                arrival.pending += 1;
                arrival.next_arrival += exp.sample(&mut self.rng);
            }
            if arrival.pending == 0 {
                continue;
            }
            let mut last = self.lanes[idx].last();
            if lane == Lane::Lane2 && self.ego_occupies_lane2() {
                let ego = self.ego.as_ref().expect("occupancy implies ego");
                if last.map_or(true, |l| ego.pos < l.pos) && ego.pos >= entry {
                    last = Some(ego);
                }
            }
            let speed = match last {
                None => params.v_max,
                Some(l) => {
                    let gap = l.rear() - entry;
                    if gap < self.config.min_insert_gap {
                        continue;
                    }
                    safe_speed_for_gap(params.v_max, l.velocity, gap, params).min(params.v_max)
                }
            };
            let arrival = &mut self.arrivals[idx];
            arrival.pending -= 1;
            arrival.spawned += 1;
            let id = self.next_id;
            self.next_id += 1;
            let vehicle = Vehicle::new(id, lane, entry, speed, self.config.vehicle_length);
            self.lanes[idx].push(vehicle);
        }
    }

    /// One full background tick: Krauss update followed by spawning/removal.
    pub fn advance(&mut self) {
        self.krauss_step();
        self.spawn_traffic();
    }

    /// Integrates the ego for one `dt` with the requested target acceleration
    /// and steering angle. Out-of-range requests are clamped and reported.
    pub fn apply_ego_action(&mut self, acc_target: f64, theta_target: f64) -> Result<ActionReport> {
        let dt = self.config.dt;
        let bounds = &self.config.ego;
        let v_max = self.config.krauss.v_max;
        let half_lane = self.topology.lane_width / 2.0;
        let edge_slack = (self.topology.lane_width - self.config.vehicle_width) / 2.0;
        let merged = self.ego_merged();
        let merge_time = self.time() + dt;
        let topology = &self.topology;
        let ego = self.ego.as_mut().ok_or_else(|| Error::contract("no ego vehicle"))?;
        if !acc_target.is_finite() || !theta_target.is_finite() {
            return Err(Error::NonFinite("ego action".into()));
        }

        let acc = acc_target.clamp(bounds.acc_min, bounds.acc_max);
        let theta = theta_target.clamp(bounds.theta_min, bounds.theta_max);
        let zone = topology.zone_at(ego.pos, merged);
        let masked = zone == Zone::GapSelection;
        let heading = if masked { 0.0 } else { theta };

        let v_new = (ego.velocity + acc * dt).clamp(0.0, v_max);
        ego.acceleration = (v_new - ego.velocity) / dt;
        ego.velocity = v_new;
        ego.heading = heading;
        ego.pos += v_new * heading.cos() * dt;
        ego.lateral += v_new * heading.sin() * dt;

        let mut just_merged = false;
        if merged {
            ego.lateral = ego.lateral.clamp(-half_lane, edge_slack);
        } else {
            ego.lane = topology.entry_lane_at(ego.pos);
            let in_merge_zone = ego.pos >= topology.merge_start && ego.pos < topology.merge_end;
            if ego.lateral > half_lane && in_merge_zone {
                ego.lane = Lane::Lane2;
                ego.lateral -= topology.lane_width;
                just_merged = true;
            } else {
                ego.lateral = ego.lateral.clamp(-edge_slack, half_lane);
            }
        }
        if just_merged {
            self.merged_at = Some(merge_time);
        }
        Ok(ActionReport {
            acc_clamped: acc != acc_target,
            theta_clamped: theta != theta_target,
            theta_masked: masked && theta != 0.0,
            applied_acc: acc,
            applied_theta: heading,
        })
    }

    /// Lane-2 neighbors of the ego's projection. Gaps are bumper-to-bumper,
    /// clamped to `[0, d_max]`; a missing neighbor reads as `d_max`.
    pub fn project_ego(&self, d_max: f64) -> Result<Projection> {
        let ego = self.ego.as_ref().ok_or_else(|| Error::contract("no ego vehicle"))?;
        let proj_pos = ego.pos;
        let mut preceding: Option<&Vehicle> = None;
        let mut following: Option<&Vehicle> = None;
        for v in &self.lanes[1] {
            if v.pos > proj_pos {
                if preceding.map_or(true, |p| v.pos < p.pos) {
                    preceding = Some(v);
                }
            } else if following.map_or(true, |f| v.pos > f.pos) {
                following = Some(v);
            }
        }
        let d_r = preceding.map_or(d_max, |p| (p.rear() - proj_pos).clamp(0.0, d_max));
        let d_f = following.map_or(d_max, |f| (proj_pos - ego.length - f.pos).clamp(0.0, d_max));
        Ok(Projection {
            proj_pos,
            d_m: self.topology.merge_end - proj_pos,
            first_preceding: preceding.cloned(),
            first_following: following.cloned(),
            d_f,
            d_r,
        })
    }

    /// Up to `k` background vehicles of `lane` nearest to `pos`, front-to-back.
    pub fn nearest_in_lane(&self, lane: Lane, pos: f64, k: usize) -> Vec<&Vehicle> {
        let mut picked: Vec<&Vehicle> = self.lane_vehicles(lane).iter().collect();
        // Stable sort keeps front-first order among equal distances.
        picked.sort_by(|a, b| (a.pos - pos).abs().total_cmp(&(b.pos - pos).abs()));
        picked.truncate(k);
        picked.sort_by(|a, b| b.pos.total_cmp(&a.pos));
        picked
    }

    /// Rectangle overlap between the ego and every background vehicle.
    pub fn detect_collision(&self) -> CollisionReport {
        let Some(ego) = self.ego.as_ref() else {
            return CollisionReport::default();
        };
        let half_w = self.config.vehicle_width / 2.0;
        let ey = self.global_y(ego);
        let ego_x = (ego.rear(), ego.pos);
        let ego_y = (ey - half_w, ey + half_w);
        let ids: Vec<u32> = self
            .background()
            .filter(|v| {
                let y = self.global_y(v);
                intervals_overlap(ego_x, (v.rear(), v.pos))
                    && intervals_overlap(ego_y, (y - half_w, y + half_w))
            })
            .map(|v| v.id)
            .collect();
        CollisionReport { collided: !ids.is_empty(), ids }
    }

    /// Smallest bumper gap between consecutive background vehicles of a lane.
    pub fn min_gap(&self, lane: Lane) -> Option<f64> {
        self.lane_vehicles(lane)
            .windows(2)
            .map(|w| bumper_gap(&w[1], &w[0]))
            .min_by(f64::total_cmp)
    }

    pub fn write_trajectory_header<W: Write>(out: &mut W) -> std::io::Result<()> {
        writeln!(out, "time,id,lane,pos,lat,v,acc")
    }

    /// One CSV row per vehicle at the current time.
    pub fn write_trajectory_rows<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let t = self.time();
        for v in self.vehicles() {
            writeln!(
                out,
                "{t},{},{},{},{},{},{}",
                v.id,
                v.lane.as_str(),
                v.pos,
                self.global_y(v),
                v.velocity,
                v.acceleration
            )?;
        }
        Ok(())
    }
}
