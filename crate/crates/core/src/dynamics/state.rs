//! The 8-component lateral-control state and its network normalization.

use crate::world::{RoadGeometry, VehicleState};
use crate::{Error, Result};

pub const STATE_DIM: usize = 8;

/// Divisors applied to (v, a, x, y, θ, id, w); curvature is multiplied by
/// 1000 instead.
const SCALES: [f64; 7] = [40.0, 3.0, 1000.0, 11.25, 0.2, 2.0, 5.0];
const CURVATURE_SCALE: f64 = 1000.0;
/// Normalized components are clipped to this magnitude.
const NORM_LIMIT: f64 = 2.0;

/// Raw state `(v, a, x, y, θ, id, w, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub raw: [f64; STATE_DIM],
}

impl StateVector {
    pub fn new(v: f64, a: f64, x: f64, y: f64, theta: f64, target: usize, w: f64, c: f64) -> Self {
        Self {
            raw: [v, a, x, y, theta, target as f64, w, c],
        }
    }

    pub fn speed(&self) -> f64 {
        self.raw[0]
    }
    pub fn accel(&self) -> f64 {
        self.raw[1]
    }
    pub fn x(&self) -> f64 {
        self.raw[2]
    }
    pub fn y(&self) -> f64 {
        self.raw[3]
    }
    pub fn theta(&self) -> f64 {
        self.raw[4]
    }
    pub fn target_lane(&self) -> usize {
        self.raw[5] as usize
    }
    pub fn lane_width(&self) -> f64 {
        self.raw[6]
    }
    pub fn curvature(&self) -> f64 {
        self.raw[7]
    }

    /// Network input, every component in [-2, 2].
    pub fn normalized(&self) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        for (i, scale) in SCALES.iter().enumerate() {
            out[i] = self.raw[i] / scale;
        }
        out[7] = self.raw[7] * CURVATURE_SCALE;
        out.map(|z| z.clamp(-NORM_LIMIT, NORM_LIMIT))
    }
}

/// State of `ego` heading for `target_lane`, which must be the current lane
/// or a neighbor of it.
pub fn build_state(ego: &VehicleState, road: &RoadGeometry, target_lane: usize) -> Result<StateVector> {
    road.lane_center(target_lane)?;
    if ego.lane_index.abs_diff(target_lane) > 1 {
        return Err(Error::NonAdjacentTarget {
            current: ego.lane_index,
            target: target_lane,
        });
    }
    Ok(StateVector::new(
        ego.v,
        ego.a,
        ego.x,
        ego.y,
        ego.theta,
        target_lane,
        road.lane_width,
        road.curvature,
    ))
}
