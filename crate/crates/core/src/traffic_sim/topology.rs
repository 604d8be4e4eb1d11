use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Taper,
    Parallel,
}

/// Lengths in meters. `taper_length` is only used by [`TopologyKind::Taper`],
/// `parallel_lane_length` only by [`TopologyKind::Parallel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub pre_merge_length: f64,
    pub post_merge_length: f64,
    pub ramp_length: f64,
    pub taper_length: f64,
    pub parallel_lane_length: f64,
    pub lane_width: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            pre_merge_length: 300.0,
            post_merge_length: 100.0,
            ramp_length: 300.0,
            taper_length: 50.0,
            parallel_lane_length: 100.0,
            lane_width: 3.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lane {
    Lane1,
    Lane2,
    Ramp,
    ParallelLane,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Lane1 => "lane1",
            Lane::Lane2 => "lane2",
            Lane::Ramp => "ramp",
            Lane::ParallelLane => "parallel",
        }
    }

    pub fn is_main(self) -> bool {
        matches!(self, Lane::Lane1 | Lane::Lane2)
    }
}

/// Two-lane highway with a single on-ramp on the right of Lane 2.
///
/// All longitudinal positions share one axis: the main road runs from 0 to
/// `road_end()`, the merge point sits at `pre_merge_length`. The ramp (and the
/// parallel acceleration lane, when present) run alongside Lane 2 one lane
/// width to the right, so an ego position on the ramp projects onto Lane 2 at
/// the same longitudinal coordinate.
///
/// Lateral axis: Lane 1 center at `+lane_width`, Lane 2 center at 0, ramp and
/// parallel lane center at `-lane_width`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadTopology {
    pub kind: TopologyKind,
    pub pre_merge_length: f64,
    pub post_merge_length: f64,
    pub ramp_length: f64,
    pub parallel_lane_length: f64,
    pub lane_width: f64,
    pub ramp_entry: f64,
    pub merge_start: f64,
    pub merge_end: f64,
}

impl RoadTopology {
    pub fn build(kind: TopologyKind, geometry: &GeometryConfig) -> Result<Self> {
        let positive = [
            ("pre_merge_length", geometry.pre_merge_length),
            ("post_merge_length", geometry.post_merge_length),
            ("ramp_length", geometry.ramp_length),
            ("lane_width", geometry.lane_width),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {value}")));
            }
        }
        if geometry.ramp_length > geometry.pre_merge_length {
            return Err(Error::config(format!(
                "ramp_length {} exceeds pre_merge_length {}",
                geometry.ramp_length, geometry.pre_merge_length
            )));
        }
        let (parallel_lane_length, zone_length) = match kind {
            TopologyKind::Taper => {
                if !(geometry.taper_length > 0.0) {
                    return Err(Error::config("taper_length must be positive"));
                }
                (0.0, geometry.taper_length)
            }
            TopologyKind::Parallel => {
                if !(geometry.parallel_lane_length > 0.0) {
                    return Err(Error::config("parallel_lane_length must be positive"));
                }
                (geometry.parallel_lane_length, geometry.parallel_lane_length)
            }
        };
        if zone_length > geometry.post_merge_length {
            return Err(Error::config(format!(
                "merge zone of {zone_length} m does not fit in post_merge_length {}",
                geometry.post_merge_length
            )));
        }
        let merge_start = geometry.pre_merge_length;
        Ok(Self {
            kind,
            pre_merge_length: geometry.pre_merge_length,
            post_merge_length: geometry.post_merge_length,
            ramp_length: geometry.ramp_length,
            parallel_lane_length,
            lane_width: geometry.lane_width,
            ramp_entry: merge_start - geometry.ramp_length,
            merge_start,
            merge_end: merge_start + zone_length,
        })
    }

    pub fn road_end(&self) -> f64 {
        self.pre_merge_length + self.post_merge_length
    }

    pub fn gap_zone(&self) -> Range<f64> {
        self.ramp_entry..self.merge_start
    }

    /// Closed interval `[merge_start, merge_end]`.
    pub fn merge_zone(&self) -> (f64, f64) {
        (self.merge_start, self.merge_end)
    }

    pub fn lane_center_y(&self, lane: Lane) -> f64 {
        match lane {
            Lane::Lane1 => self.lane_width,
            Lane::Lane2 => 0.0,
            Lane::Ramp | Lane::ParallelLane => -self.lane_width,
        }
    }

    /// Lane the merging vehicle occupies at `pos` before it has merged.
    pub fn entry_lane_at(&self, pos: f64) -> Lane {
        match self.kind {
            TopologyKind::Parallel if pos >= self.merge_start => Lane::ParallelLane,
            _ => Lane::Ramp,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taper_zone_sits_inside_post_merge_section() {
        let topo = RoadTopology::build(TopologyKind::Taper, &GeometryConfig::default()).unwrap();
        assert_eq!(topo.merge_start, 300.0);
        assert!(topo.merge_end > 300.0 && topo.merge_end <= 400.0);
        assert!(topo.ramp_entry < topo.merge_start);
        assert_eq!(topo.parallel_lane_length, 0.0);
        assert_eq!(topo.road_end(), 400.0);
    }

    #[test]
    fn parallel_adds_acceleration_lane() {
        let topo = RoadTopology::build(TopologyKind::Parallel, &GeometryConfig::default()).unwrap();
        assert_eq!(topo.parallel_lane_length, 100.0);
        assert_eq!(topo.merge_end - topo.merge_start, 100.0);
        assert_eq!(topo.entry_lane_at(299.9), Lane::Ramp);
        assert_eq!(topo.entry_lane_at(300.0), Lane::ParallelLane);
    }

    #[test]
    fn non_positive_lengths_are_rejected() {
        let geometry = GeometryConfig { pre_merge_length: 0.0, ..Default::default() };
        assert!(matches!(
            RoadTopology::build(TopologyKind::Taper, &geometry),
            Err(Error::Config(_))
        ));
        let geometry = GeometryConfig { parallel_lane_length: 0.0, ..Default::default() };
        assert!(RoadTopology::build(TopologyKind::Parallel, &geometry).is_err());
        let geometry = GeometryConfig { post_merge_length: -5.0, ..Default::default() };
        assert!(RoadTopology::build(TopologyKind::Taper, &geometry).is_err());
    }
}
