//! Lane-change episode record and its phase machine.

use super::lateral::Action;
use super::reward::RewardTerms;
use super::state::StateVector;
use crate::world::{RoadGeometry, VehicleId, VehicleState};
use crate::{Error, Result};

/// Steps allowed in Changing/Aborting before the episode times out (10 s at
/// dt = 0.1).
pub const EPISODE_STEP_LIMIT: u32 = 100;

pub const TERMINAL_LATERAL_TOL: f64 = 0.1;
pub const TERMINAL_HEADING_TOL: f64 = 0.02;
pub const TERMINAL_YAW_RATE_TOL: f64 = 0.05;

/// One replay record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: StateVector,
    pub a: Action,
    pub r: f64,
    pub s_next: StateVector,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Waiting for an acceptable gap in the target lane.
    Seeking,
    Changing,
    /// Returning to the origin lane after the guard rejected the gap.
    Aborting,
    Done,
    TimedOut,
}

impl Phase {
    pub fn is_finished(self) -> bool {
        matches!(self, Phase::Done | Phase::TimedOut)
    }

    pub fn is_acting(self) -> bool {
        matches!(self, Phase::Changing | Phase::Aborting)
    }
}

/// Settled at the lane center: small lateral offset, heading and yaw rate.
pub fn check_terminal(ego: &VehicleState, target_lane: usize, road: &RoadGeometry) -> Result<bool> {
    let center = road.lane_center(target_lane)?;
    Ok((center - ego.y).abs() <= TERMINAL_LATERAL_TOL
        && ego.theta.abs() <= TERMINAL_HEADING_TOL
        && ego.omega.abs() <= TERMINAL_YAW_RATE_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneChangeEpisode {
    pub id: u64,
    pub vid: VehicleId,
    pub origin_lane: usize,
    pub target_lane: usize,
    phase: Phase,
    aborted: bool,
    step_count: u32,
    transitions: Vec<Transition>,
    terms: Vec<RewardTerms>,
    /// (R_acce, R_rate, R_time)
    component_sums: (f64, f64, f64),
    max_abs_omega: f64,
}

impl LaneChangeEpisode {
    pub fn new(id: u64, vid: VehicleId, origin_lane: usize, target_lane: usize) -> Self {
        Self {
            id,
            vid,
            origin_lane,
            target_lane,
            phase: Phase::Seeking,
            aborted: false,
            step_count: 0,
            transitions: Vec::new(),
            terms: Vec::new(),
            component_sums: (0.0, 0.0, 0.0),
            max_abs_omega: 0.0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn aborted(&self) -> bool {
        self.aborted
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn reward_terms(&self) -> &[RewardTerms] {
        &self.terms
    }

    /// Lane currently steered for: the origin lane once aborted.
    pub fn current_target(&self) -> usize {
        if self.aborted {
            self.origin_lane
        } else {
            self.target_lane
        }
    }

    pub fn component_sums(&self) -> (f64, f64, f64) {
        self.component_sums
    }

    /// Largest yaw rate magnitude seen after any acting step.
    pub fn max_abs_omega(&self) -> f64 {
        self.max_abs_omega
    }

    pub fn mean_abs_yaw_accel(&self) -> f64 {
        if self.transitions.is_empty() {
            return 0.0;
        }
        let total: f64 = self.transitions.iter().map(|t| t.a.yaw_accel().abs()).sum();
        total / self.transitions.len() as f64
    }

    /// Total return R = R_acce + R_rate + R_time.
    pub fn total_return(&self) -> f64 {
        let (acce, rate, time) = self.component_sums;
        acce + rate + time
    }

    fn ensure_live(&self) -> Result<()> {
        if self.phase.is_finished() {
            Err(Error::EpisodeFinished(self.id))
        } else {
            Ok(())
        }
    }

    /// Seeking -> Changing once the gap is accepted.
    pub fn accept_gap(&mut self) -> Result<()> {
        self.ensure_live()?;
        if self.phase == Phase::Seeking {
            self.phase = Phase::Changing;
        }
        Ok(())
    }

    /// Changing -> Aborting; the target becomes the origin lane.
    pub fn abort(&mut self) -> Result<()> {
        self.ensure_live()?;
        if self.phase == Phase::Changing {
            self.phase = Phase::Aborting;
            self.aborted = true;
        }
        Ok(())
    }

    /// Logs one acting step (with the yaw rate it produced) and applies the
    /// Done/TimedOut rules.
    pub fn record(&mut self, transition: Transition, terms: RewardTerms, omega: f64) -> Result<Phase> {
        self.ensure_live()?;
        if !self.phase.is_acting() {
            return Err(Error::InvalidParam(format!(
                "episode {} cannot record a step while {:?}",
                self.id, self.phase
            )));
        }
        self.transitions.push(transition);
        self.terms.push(terms);
        self.component_sums.0 += terms.acce;
        self.component_sums.1 += terms.rate;
        self.component_sums.2 += terms.time;
        self.max_abs_omega = self.max_abs_omega.max(omega.abs());
        self.step_count += 1;
        if transition.terminal {
            self.phase = Phase::Done;
        } else if self.step_count >= EPISODE_STEP_LIMIT {
            self.phase = Phase::TimedOut;
        }
        Ok(self.phase)
    }
}
