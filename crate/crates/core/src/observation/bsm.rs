use serde::{Deserialize, Serialize};

use crate::mdp_env::{RawState, VehicleSlot, VEHICLE_SLOTS};
use crate::traffic_sim::RoadTopology;

pub const BSM_LEN: usize = 4 * VEHICLE_SLOTS;

/// Affine per-field scales mapping raw kinematics to roughly [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsmScales {
    pub v_max: f64,
    pub acc_scale: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_scale: f64,
}

impl BsmScales {
    /// Longitudinal range spans the ramp entry to the sentinel position.
    pub fn for_topology(topo: &RoadTopology, v_max: f64, d_max: f64) -> Self {
        Self {
            v_max,
            acc_scale: 4.5,
            x_min: topo.ramp_entry,
            x_max: topo.road_end() + d_max,
            y_scale: 2.0 * topo.lane_width,
        }
    }

    fn x_half(&self) -> f64 {
        (self.x_max - self.x_min) / 2.0
    }
}

/// Velocities (7), accelerations (7), x positions (7), y positions (7).
#[derive(Clone, Debug, PartialEq)]
pub struct BsmVector(pub [f64; BSM_LEN]);

impl BsmVector {
    pub fn zeros() -> Self {
        Self([0.0; BSM_LEN])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode_slots(slots: &[VehicleSlot; VEHICLE_SLOTS], scales: &BsmScales) -> BsmVector {
    let mut out = [0.0; BSM_LEN];
    let n = VEHICLE_SLOTS;
    for (i, s) in slots.iter().enumerate() {
        out[i] = s.v / scales.v_max;
        out[n + i] = s.acc / scales.acc_scale;
        out[2 * n + i] = (s.x - scales.x_min) / scales.x_half() - 1.0;
        out[3 * n + i] = s.y / scales.y_scale;
    }
    BsmVector(out)
}

pub fn encode_bsm(raw: &RawState, scales: &BsmScales) -> BsmVector {
    encode_slots(&raw.slots(), scales)
}

/// Inverse of [`encode_slots`] for the kinematic fields.
pub fn decode_bsm(vector: &BsmVector, scales: &BsmScales) -> [(f64, f64, f64, f64); VEHICLE_SLOTS] {
    let n = VEHICLE_SLOTS;
    let v = &vector.0;
    std::array::from_fn(|i| {
        (
            v[i] * scales.v_max,
            v[n + i] * scales.acc_scale,
            (v[2 * n + i] + 1.0) * scales.x_half() + scales.x_min,
            v[3 * n + i] * scales.y_scale,
        )
    })
}
