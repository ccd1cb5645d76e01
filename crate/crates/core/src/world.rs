//! Road geometry, the vehicle population, stochastic traffic generation and
//! the fixed-step simulation clock.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::lateral::{integrate_lateral, Action};
use crate::gap::Neighbor;
use crate::idm::{dual_leader_accel, IdmParams, Leader, BRAKE_LIMIT};
use crate::{stream_rng, Error, Result, Stream};

pub type VehicleId = u64;

/// Vehicle length in meters.
pub const VEHICLE_LENGTH: f64 = 5.0;

/// A lane is blocked for spawning while any vehicle in it is closer than
/// this to the entrance.
pub const ENTRANCE_CLEARANCE: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGeometry {
    pub n_lanes: usize,
    pub segment_length: f64,
    pub lane_width: f64,
    /// 1/m; zero on a straight road.
    pub curvature: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self {
            n_lanes: 3,
            segment_length: 1000.0,
            lane_width: 3.75,
            curvature: 0.0,
        }
    }
}

impl RoadGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.n_lanes < 2 {
            return Err(Error::InvalidParam("n_lanes must be >= 2".into()));
        }
        if !(self.lane_width > 0.0) || !(self.segment_length > 0.0) {
            return Err(Error::InvalidParam(
                "lane_width and segment_length must be positive".into(),
            ));
        }
        if !self.curvature.is_finite() {
            return Err(Error::InvalidParam("curvature must be finite".into()));
        }
        Ok(())
    }

    /// Lateral position of a lane center, measured from the right road edge.
    pub fn lane_center(&self, lane: usize) -> Result<f64> {
        if lane >= self.n_lanes {
            return Err(Error::LaneOutOfRange {
                lane,
                n_lanes: self.n_lanes,
            });
        }
        Ok((lane as f64 + 0.5) * self.lane_width)
    }

    pub fn road_width(&self) -> f64 {
        self.n_lanes as f64 * self.lane_width
    }

    /// Lane containing lateral position `y`.
    pub fn lane_of(&self, y: f64) -> usize {
        let lane = (y / self.lane_width).floor();
        (lane.max(0.0) as usize).min(self.n_lanes - 1)
    }

    /// Whether a vehicle at `y` reaches into `lane`: it counts once it is
    /// more than a quarter lane width past its own lane center toward it.
    pub fn occupies(&self, y: f64, lane: usize) -> bool {
        let center = (lane as f64 + 0.5) * self.lane_width;
        (y - center).abs() < 0.75 * self.lane_width
    }

    pub fn adjacent_lanes(&self, lane: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2);
        if lane > 0 {
            out.push(lane - 1);
        }
        if lane + 1 < self.n_lanes {
            out.push(lane + 1);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub vid: VehicleId,
    pub lane_index: usize,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub theta: f64,
    pub omega: f64,
    pub length: f64,
    pub v_limit: f64,
}

/// Traffic and clock settings. All speeds are m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub road: RoadGeometry,
    /// Per-lane inter-departure time range, s.
    pub departure_interval: (f64, f64),
    /// Individual speed limit range, m/s.
    pub v_limit_range: (f64, f64),
    pub dt: f64,
    pub seed: u64,
    /// Range of x at which a vehicle receives its lane-change command, m.
    pub command_x_range: (f64, f64),
    /// Upper bound on simulation steps for any single run.
    pub max_sim_steps: u64,
}

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            road: RoadGeometry::default(),
            departure_interval: (5.0, 10.0),
            v_limit_range: (kmh_to_ms(80.0), kmh_to_ms(120.0)),
            dt: 0.1,
            seed: 0,
            command_x_range: (50.0, 450.0),
            max_sim_steps: 400_000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        let ranges = [
            ("departure_interval", self.departure_interval),
            ("v_limit_range", self.v_limit_range),
            ("command_x_range", self.command_x_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParam(format!("{name}: min must be <= max")));
            }
        }
        if !(self.departure_interval.0 > 0.0) || !(self.v_limit_range.0 > 0.0) {
            return Err(Error::InvalidParam(
                "departure interval and speed limits must be positive".into(),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParam("dt must be positive".into()));
        }
        if self.command_x_range.0 < 0.0 || self.command_x_range.1 > self.road.segment_length {
            return Err(Error::InvalidParam(
                "command_x_range must lie on the road segment".into(),
            ));
        }
        Ok(())
    }
}

/// Lanes a lane-changing vehicle is moving between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Maneuver {
    pub origin: usize,
    pub target: usize,
    /// Set while returning to the origin lane; the vehicle may then not
    /// cross into the target lane.
    pub aborting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrafficCounters {
    pub spawned: u64,
    pub exited: u64,
}

#[derive(Debug, Clone)]
struct LaneSpawner {
    countdown: u64,
}

#[derive(Debug, Clone)]
pub struct World {
    road: RoadGeometry,
    idm: IdmParams,
    dt: f64,
    departure_interval: (f64, f64),
    v_limit_range: (f64, f64),
    vehicles: Vec<VehicleState>,
    maneuvers: BTreeMap<VehicleId, Maneuver>,
    spawners: Vec<LaneSpawner>,
    rng: ChaCha8Rng,
    next_vid: VehicleId,
    step: u64,
    counters: TrafficCounters,
}

impl World {
    pub fn new(scenario: &ScenarioConfig, idm: IdmParams) -> Result<Self> {
        scenario.validate()?;
        idm.validate()?;
        let mut world = Self {
            road: scenario.road,
            idm,
            dt: scenario.dt,
            departure_interval: scenario.departure_interval,
            v_limit_range: scenario.v_limit_range,
            vehicles: Vec::new(),
            maneuvers: BTreeMap::new(),
            spawners: Vec::new(),
            rng: stream_rng(scenario.seed, Stream::Traffic),
            next_vid: 1,
            step: 0,
            counters: TrafficCounters::default(),
        };
        world.spawners = (0..world.road.n_lanes)
            .map(|_| LaneSpawner {
                countdown: world.draw_interval_steps(),
            })
            .collect();
        Ok(world)
    }

    /// Empty world without stochastic departures, for scripted scenarios.
    pub fn scripted(road: RoadGeometry, idm: IdmParams, dt: f64) -> Result<Self> {
        let scenario = ScenarioConfig {
            road,
            dt,
            ..ScenarioConfig::default()
        };
        let mut world = Self::new(&scenario, idm)?;
        for s in &mut world.spawners {
            s.countdown = u64::MAX;
        }
        Ok(world)
    }

    fn draw_interval_steps(&mut self) -> u64 {
        let (lo, hi) = self.departure_interval;
        let seconds = if hi > lo { self.rng.random_range(lo..=hi) } else { lo };
        ((seconds / self.dt).round() as u64).max(1)
    }

    pub fn road(&self) -> &RoadGeometry {
        &self.road
    }

    pub fn idm(&self) -> &IdmParams {
        &self.idm
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn counters(&self) -> TrafficCounters {
        self.counters
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn vehicle(&self, vid: VehicleId) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.vid == vid)
    }

    pub fn vehicle_mut(&mut self, vid: VehicleId) -> Option<&mut VehicleState> {
        self.vehicles.iter_mut().find(|v| v.vid == vid)
    }

    pub fn maneuver(&self, vid: VehicleId) -> Option<Maneuver> {
        self.maneuvers.get(&vid).copied()
    }

    pub fn set_maneuver(&mut self, vid: VehicleId, maneuver: Maneuver) {
        self.maneuvers.insert(vid, maneuver);
    }

    pub fn clear_maneuver(&mut self, vid: VehicleId) {
        self.maneuvers.remove(&vid);
    }

    /// Places a vehicle at the center of `lane`, driving straight. Used by
    /// scripted scenarios and tests.
    pub fn insert_vehicle(&mut self, lane: usize, x: f64, v: f64, v_limit: f64) -> Result<VehicleId> {
        let y = self.road.lane_center(lane)?;
        let vid = self.next_vid;
        self.next_vid += 1;
        self.vehicles.push(VehicleState {
            vid,
            lane_index: lane,
            x,
            y,
            v,
            a: 0.0,
            theta: 0.0,
            omega: 0.0,
            length: VEHICLE_LENGTH,
            v_limit,
        });
        self.counters.spawned += 1;
        Ok(vid)
    }

    /// Hands a vehicle back to lane keeping: centered in its current lane,
    /// heading along the road.
    pub fn settle_in_lane(&mut self, vid: VehicleId) {
        let road = self.road;
        if let Some(v) = self.vehicle_mut(vid) {
            v.lane_index = road.lane_of(v.y);
            v.y = (v.lane_index as f64 + 0.5) * road.lane_width;
            v.theta = 0.0;
            v.omega = 0.0;
        }
    }

    /// Whether `v` must be respected by traffic in `lane`: it physically
    /// reaches into the lane, or its maneuver corridor spans the lane.
    fn reaches_into(&self, v: &VehicleState, lane: usize) -> bool {
        self.road.occupies(v.y, lane)
            || self
                .maneuvers
                .get(&v.vid)
                .is_some_and(|m| m.origin == lane || m.target == lane)
    }

    /// Per-lane departure process. Returns the ids of vehicles spawned.
    pub fn spawn_traffic(&mut self) -> Vec<VehicleId> {
        let mut spawned = Vec::new();
        for lane in 0..self.road.n_lanes {
            if self.spawners[lane].countdown == u64::MAX {
                continue;
            }
            if self.spawners[lane].countdown > 1 {
                self.spawners[lane].countdown -= 1;
                continue;
            }
            // countdown elapsed: spawn now, or retry next step if blocked
            self.spawners[lane].countdown = 1;
            let blocked = self
                .vehicles
                .iter()
                .any(|v| v.x < ENTRANCE_CLEARANCE && self.reaches_into(v, lane));
            if blocked {
                continue;
            }
            let (lo, hi) = self.v_limit_range;
            let v_limit = if hi > lo { self.rng.random_range(lo..=hi) } else { lo };
            let downstream = self
                .vehicles
                .iter()
                .filter(|v| self.reaches_into(v, lane))
                .min_by(|a, b| a.x.total_cmp(&b.x))
                .map(|v| v.v);
            let v = downstream.map_or(v_limit, |s| s.min(v_limit));
            let vid = self
                .insert_vehicle(lane, 0.0, v, v_limit)
                .expect("spawner lanes are in range");
            spawned.push(vid);
            self.spawners[lane].countdown = self.draw_interval_steps();
        }
        spawned
    }

    /// Nearest vehicle ahead of `idx` among those that must be respected in
    /// `lane`.
    fn leader_in_lane(&self, idx: usize, lane: usize) -> Option<Leader> {
        let ego = &self.vehicles[idx];
        self.vehicles
            .iter()
            .enumerate()
            .filter(|&(j, other)| {
                j != idx
                    && self.reaches_into(other, lane)
                    && (other.x > ego.x || (other.x == ego.x && other.vid < ego.vid))
            })
            .min_by(|(_, a), (_, b)| a.x.total_cmp(&b.x))
            .map(|(_, other)| Leader {
                gap: other.x - other.length - ego.x,
                speed: other.v,
            })
    }

    fn longitudinal_accel(&self, idx: usize) -> f64 {
        let ego = &self.vehicles[idx];
        let (own, other) = match self.maneuvers.get(&ego.vid) {
            Some(m) => (m.origin, Some(m.target)),
            None => (ego.lane_index, None),
        };
        let leaders = [Some(own), other].map(|lane| lane.and_then(|l| self.leader_in_lane(idx, l)));
        if leaders.iter().flatten().any(|l| l.gap <= 0.0) {
            return BRAKE_LIMIT;
        }
        dual_leader_accel(&self.idm, ego.v, ego.v_limit, leaders[0], leaders[1])
            .expect("gaps checked positive")
            .max(BRAKE_LIMIT)
    }

    /// Target-lane vehicles directly ahead of and behind `vid`, for gap
    /// assessment. A maneuvering vehicle counts in both lanes of its corridor.
    pub fn target_lane_neighbors(
        &self,
        vid: VehicleId,
        lane: usize,
    ) -> (Option<Neighbor>, Option<Neighbor>) {
        let Some(ego) = self.vehicle(vid) else {
            return (None, None);
        };
        let mut lead: Option<&VehicleState> = None;
        let mut lag: Option<&VehicleState> = None;
        for other in &self.vehicles {
            if other.vid == vid {
                continue;
            }
            if !self.reaches_into(other, lane) {
                continue;
            }
            if other.x >= ego.x {
                if lead.is_none_or(|l| other.x < l.x) {
                    lead = Some(other);
                }
            } else if lag.is_none_or(|l| other.x > l.x) {
                lag = Some(other);
            }
        }
        (
            lead.map(|l| Neighbor {
                gap: l.x - l.length - ego.x,
                speed: l.v,
            }),
            lag.map(|l| Neighbor {
                gap: ego.x - ego.length - l.x,
                speed: l.v,
            }),
        )
    }

    /// Lateral bounds for a maneuvering vehicle: between the two lane centers
    /// plus a quarter lane of overshoot, and never past the lane boundary
    /// while returning to the origin lane.
    fn lateral_corridor(&self, m: &Maneuver) -> (f64, f64) {
        let w = self.road.lane_width;
        let lo_lane = m.origin.min(m.target) as f64;
        let hi_lane = m.origin.max(m.target) as f64;
        let (mut lo, mut hi) = ((lo_lane + 0.25) * w, (hi_lane + 0.75) * w);
        if m.aborting {
            let boundary = hi_lane * w;
            let margin = 1e-9 * w;
            if m.origin < m.target {
                hi = boundary - margin;
            } else {
                lo = boundary;
            }
        }
        (lo.max(0.0), hi.min(self.road.road_width()))
    }

    /// Advances the clock one step: longitudinal control for every vehicle,
    /// lateral integration for vehicles given a yaw acceleration, removal of
    /// vehicles past the segment end and a same-lane overlap check.
    pub fn step(&mut self, lateral: &[(VehicleId, Action)]) -> Result<()> {
        let accels: Vec<f64> = (0..self.vehicles.len())
            .map(|i| self.longitudinal_accel(i))
            .collect();
        let dt = self.dt;
        for (veh, a) in self.vehicles.iter_mut().zip(accels) {
            veh.a = a;
            veh.v = (veh.v + a * dt).max(0.0);
            veh.x += veh.v * veh.theta.cos() * dt;
        }
        for &(vid, action) in lateral {
            let corridor = self.maneuvers.get(&vid).map(|m| self.lateral_corridor(m));
            let road = self.road;
            if let Some(veh) = self.vehicle_mut(vid) {
                integrate_lateral(veh, action, dt);
                let (lo, hi) = corridor.unwrap_or((0.0, road.road_width()));
                veh.y = veh.y.clamp(lo, hi);
                veh.lane_index = road.lane_of(veh.y);
            }
        }
        let length = self.road.segment_length;
        let before = self.vehicles.len();
        let maneuvers = &mut self.maneuvers;
        self.vehicles.retain(|v| {
            let keep = v.x <= length;
            if !keep {
                maneuvers.remove(&v.vid);
            }
            keep
        });
        self.counters.exited += (before - self.vehicles.len()) as u64;
        self.step += 1;
        self.check_overlaps()
    }

    fn check_overlaps(&self) -> Result<()> {
        for lane in 0..self.road.n_lanes {
            let mut in_lane: Vec<&VehicleState> =
                self.vehicles.iter().filter(|v| v.lane_index == lane).collect();
            in_lane.sort_by(|a, b| a.x.total_cmp(&b.x).then(b.vid.cmp(&a.vid)));
            for pair in in_lane.windows(2) {
                let (follower, leader) = (pair[0], pair[1]);
                let gap = leader.x - leader.length - follower.x;
                if gap < 0.0 {
                    return Err(Error::Collision {
                        step: self.step,
                        lane,
                        leader: leader.vid,
                        follower: follower.vid,
                        gap,
                    });
                }
            }
        }
        Ok(())
    }

    /// Smallest same-lane bumper gap currently on the road.
    pub fn min_same_lane_gap(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for lane in 0..self.road.n_lanes {
            let mut xs: Vec<&VehicleState> =
                self.vehicles.iter().filter(|v| v.lane_index == lane).collect();
            xs.sort_by(|a, b| a.x.total_cmp(&b.x));
            for pair in xs.windows(2) {
                let gap = pair[1].x - pair[1].length - pair[0].x;
                best = Some(best.map_or(gap, |b| b.min(gap)));
            }
        }
        best
    }

    /// Spawn traffic, then step.
    pub fn tick(&mut self, lateral: &[(VehicleId, Action)]) -> Result<Vec<VehicleId>> {
        let spawned = self.spawn_traffic();
        self.step(lateral)?;
        Ok(spawned)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted() -> World {
        World::scripted(RoadGeometry::default(), IdmParams::default(), 0.1).unwrap()
    }

    #[test]
    fn lane_centers() {
        let road = RoadGeometry::default();
        assert_eq!(road.lane_center(0).unwrap(), 1.875);
        assert_eq!(road.lane_center(1).unwrap(), 5.625);
        assert_eq!(road.lane_center(2).unwrap(), 9.375);
        assert!(matches!(road.lane_center(3), Err(Error::LaneOutOfRange { .. })));
    }

    #[test]
    fn occupancy_threshold_is_a_quarter_lane() {
        let road = RoadGeometry::default();
        let c0 = road.lane_center(0).unwrap();
        assert!(road.occupies(c0, 0));
        assert!(!road.occupies(c0, 1));
        assert!(!road.occupies(c0 + 0.25 * 3.75, 1));
        assert!(road.occupies(c0 + 0.26 * 3.75, 1));
    }

    #[test]
    fn constant_speed_advance() {
        let mut w = scripted();
        let vid = w.insert_vehicle(0, 100.0, 20.0, 20.0).unwrap();
        w.step(&[]).unwrap();
        let v = w.vehicle(vid).unwrap();
        assert!((v.x - 102.0).abs() < 1e-12);
        assert_eq!(v.a, 0.0);
    }

    #[test]
    fn speed_never_negative() {
        let mut w = scripted();
        let lead = w.insert_vehicle(0, 20.0, 0.0, 30.0).unwrap();
        let vid = w.insert_vehicle(0, 14.0, 0.05, 30.0).unwrap();
        w.step(&[]).unwrap();
        let v = w.vehicle(vid).unwrap();
        assert_eq!(v.v, 0.0);
        assert_eq!(v.x, 14.0);
        assert!(w.vehicle(lead).is_some());
    }

    #[test]
    fn exit_past_segment_end() {
        let mut w = scripted();
        let vid = w.insert_vehicle(1, 999.5, 20.0, 20.0).unwrap();
        w.step(&[]).unwrap();
        assert!(w.vehicle(vid).is_none());
        assert_eq!(w.counters().exited, 1);
    }

    #[test]
    fn overlap_is_reported() {
        let mut w = scripted();
        w.insert_vehicle(0, 100.0, 0.0, 30.0).unwrap();
        w.insert_vehicle(0, 98.0, 0.0, 30.0).unwrap();
        assert!(matches!(w.step(&[]), Err(Error::Collision { .. })));
    }

    #[test]
    fn spawn_countdown_and_blocking() {
        let scenario = ScenarioConfig {
            departure_interval: (7.2, 7.2),
            ..ScenarioConfig::default()
        };
        let mut w = World::new(&scenario, IdmParams::default()).unwrap();
        for step in 1..=71 {
            assert!(w.spawn_traffic().is_empty(), "early spawn at step {step}");
        }
        let spawned = w.spawn_traffic();
        assert_eq!(spawned.len(), 3);
        for vid in &spawned {
            let v = w.vehicle(*vid).unwrap();
            assert_eq!(v.x, 0.0);
            assert_eq!(v.theta, 0.0);
            assert_eq!(v.y, w.road().lane_center(v.lane_index).unwrap());
        }

        // entrance blocked by a vehicle at x = 10: retried every step
        let mut w = World::new(&scenario, IdmParams::default()).unwrap();
        let blocker = w.insert_vehicle(0, 10.0, 0.0, 30.0).unwrap();
        for _ in 0..72 {
            w.spawn_traffic();
        }
        let lane0: Vec<_> = w.vehicles().iter().filter(|v| v.lane_index == 0).collect();
        assert_eq!(lane0.len(), 1);
        w.vehicle_mut(blocker).unwrap().x = 20.0;
        let spawned = w.spawn_traffic();
        assert!(spawned.iter().any(|vid| w.vehicle(*vid).unwrap().lane_index == 0));
    }

    #[test]
    fn spawn_speed_capped_by_downstream_vehicle() {
        let scenario = ScenarioConfig {
            departure_interval: (5.0, 5.0),
            v_limit_range: (30.0, 30.0),
            ..ScenarioConfig::default()
        };
        let mut w = World::new(&scenario, IdmParams::default()).unwrap();
        w.insert_vehicle(2, 40.0, 12.0, 30.0).unwrap();
        let mut spawned = Vec::new();
        while spawned.is_empty() {
            spawned = w.spawn_traffic();
        }
        for vid in spawned {
            let v = w.vehicle(vid).unwrap();
            let expected = if v.lane_index == 2 { 12.0 } else { 30.0 };
            assert_eq!(v.v, expected);
        }
    }
}
