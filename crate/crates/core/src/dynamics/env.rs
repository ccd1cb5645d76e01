//! Traffic world plus lane-change commands and the episodes they start.
//!
//! One call to [`Environment::step`] is one simulation step:
//!
//! 1. spawn traffic and hand out lane-change commands,
//! 2. advance every live episode's phase machine (gap acceptance while
//!    Seeking, the safety guard while Changing) and query the policy for
//!    every acting episode,
//! 3. step the world with the chosen yaw accelerations,
//! 4. score each acting episode and log its transition.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::episode::{check_terminal, LaneChangeEpisode, Phase, Transition};
use super::lateral::Action;
use super::reward::{immediate_reward, RewardWeights};
use super::state::{build_state, StateVector};
use crate::gap::{assess_gap, guard_decision, GapAssessment, GuardDecision, SafetyParams};
use crate::idm::IdmParams;
use crate::world::{Maneuver, ScenarioConfig, VehicleId, World};
use crate::{stream_rng, Error, Result, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Command {
    trigger_x: f64,
    target: usize,
}

/// Finished-episode digest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub id: u64,
    pub vid: VehicleId,
    pub origin_lane: usize,
    pub target_lane: usize,
    pub outcome: Phase,
    pub aborted: bool,
    pub steps: u32,
    pub total_return: f64,
    pub r_acce: f64,
    pub r_rate: f64,
    pub r_time: f64,
    pub mean_abs_a_yaw: f64,
    pub max_abs_omega: f64,
}

impl EpisodeSummary {
    pub fn of(episode: &LaneChangeEpisode) -> Self {
        let (r_acce, r_rate, r_time) = episode.component_sums();
        Self {
            id: episode.id,
            vid: episode.vid,
            origin_lane: episode.origin_lane,
            target_lane: episode.target_lane,
            outcome: episode.phase(),
            aborted: episode.aborted(),
            steps: episode.step_count(),
            total_return: episode.total_return(),
            r_acce,
            r_rate,
            r_time,
            mean_abs_a_yaw: episode.mean_abs_yaw_accel(),
            max_abs_omega: episode.max_abs_omega(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    /// Transitions logged this step, tagged with their episode id.
    pub transitions: Vec<(u64, Transition)>,
    /// Episodes that reached Done or TimedOut this step.
    pub finished: Vec<LaneChangeEpisode>,
    /// Episodes that became Aborting this step.
    pub aborted: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EpisodeCounters {
    pub started: u64,
    pub done: u64,
    pub aborted: u64,
    pub timed_out: u64,
    /// Dropped because the vehicle left the segment mid-episode.
    pub truncated: u64,
}

/// Re-runs gap acceptance against the current target-lane neighbors and
/// decides whether a Changing episode must abort.
pub fn safety_guard(
    world: &World,
    episode: &LaneChangeEpisode,
    params: &SafetyParams,
) -> Result<GuardDecision> {
    if episode.phase() != Phase::Changing {
        return Ok(GuardDecision::Continue);
    }
    let ego = world
        .vehicle(episode.vid)
        .ok_or_else(|| Error::InvalidParam(format!("vehicle {} not on the road", episode.vid)))?;
    let road = world.road();
    let origin = road.lane_center(episode.origin_lane)?;
    let target = road.lane_center(episode.target_lane)?;
    let progress = (ego.y - origin) / (target - origin);
    let assessment = assess_target_gap(world, episode.vid, episode.target_lane, params);
    Ok(guard_decision(&assessment, progress))
}

fn assess_target_gap(world: &World, vid: VehicleId, lane: usize, params: &SafetyParams) -> GapAssessment {
    let (lead, lag) = world.target_lane_neighbors(vid, lane);
    let speed = world.vehicle(vid).map_or(0.0, |v| v.v);
    assess_gap(speed, lead, lag, params)
}

#[derive(Debug, Clone)]
pub struct Environment {
    world: World,
    safety: SafetyParams,
    weights: RewardWeights,
    command_x_range: (f64, f64),
    rng: ChaCha8Rng,
    auto_commands: bool,
    pending: BTreeMap<VehicleId, Command>,
    live: Vec<LaneChangeEpisode>,
    next_episode_id: u64,
    counters: EpisodeCounters,
}

impl Environment {
    /// Stochastic traffic where every spawned vehicle is eventually told to
    /// change to a random adjacent lane.
    pub fn new(
        scenario: &ScenarioConfig,
        idm: IdmParams,
        safety: SafetyParams,
        weights: RewardWeights,
    ) -> Result<Self> {
        let world = World::new(scenario, idm)?;
        Ok(Self {
            world,
            safety,
            weights,
            command_x_range: scenario.command_x_range,
            rng: stream_rng(scenario.seed, Stream::Commands),
            auto_commands: true,
            pending: BTreeMap::new(),
            live: Vec::new(),
            next_episode_id: 1,
            counters: EpisodeCounters::default(),
        })
    }

    /// Wraps a hand-built world; lane changes only start via [`Self::command`].
    pub fn scripted(world: World, safety: SafetyParams, weights: RewardWeights) -> Self {
        Self {
            world,
            safety,
            weights,
            command_x_range: (0.0, 0.0),
            rng: stream_rng(0, Stream::Commands),
            auto_commands: false,
            pending: BTreeMap::new(),
            live: Vec::new(),
            next_episode_id: 1,
            counters: EpisodeCounters::default(),
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    pub fn counters(&self) -> EpisodeCounters {
        self.counters
    }

    pub fn live_episodes(&self) -> &[LaneChangeEpisode] {
        &self.live
    }

    /// Starts a Seeking episode for `vid` toward `target`.
    pub fn command(&mut self, vid: VehicleId, target: usize) -> Result<u64> {
        let ego = self
            .world
            .vehicle(vid)
            .ok_or_else(|| Error::InvalidParam(format!("vehicle {vid} not on the road")))?;
        let origin = ego.lane_index;
        self.world.road().lane_center(target)?;
        if origin.abs_diff(target) != 1 {
            return Err(Error::NonAdjacentTarget {
                current: origin,
                target,
            });
        }
        Ok(self.open_episode(vid, origin, target))
    }

    fn open_episode(&mut self, vid: VehicleId, origin: usize, target: usize) -> u64 {
        let id = self.next_episode_id;
        self.next_episode_id += 1;
        self.counters.started += 1;
        self.live.push(LaneChangeEpisode::new(id, vid, origin, target));
        id
    }

    fn issue_commands(&mut self, spawned: &[VehicleId]) {
        if !self.auto_commands {
            return;
        }
        let (lo, hi) = self.command_x_range;
        for &vid in spawned {
            let Some(v) = self.world.vehicle(vid) else { continue };
            let lanes = self.world.road().adjacent_lanes(v.lane_index);
            let target = *lanes.choose(&mut self.rng).expect("at least two lanes");
            let trigger_x = if hi > lo { self.rng.random_range(lo..=hi) } else { lo };
            self.pending.insert(vid, Command { trigger_x, target });
        }
        let due: Vec<(VehicleId, Command)> = self
            .pending
            .iter()
            .filter(|(vid, cmd)| self.world.vehicle(**vid).is_some_and(|v| v.x >= cmd.trigger_x))
            .map(|(vid, cmd)| (*vid, *cmd))
            .collect();
        for (vid, cmd) in due {
            self.pending.remove(&vid);
            let origin = self.world.vehicle(vid).expect("due vehicle present").lane_index;
            self.open_episode(vid, origin, cmd.target);
        }
        let world = &self.world;
        self.pending.retain(|vid, _| world.vehicle(*vid).is_some());
    }

    /// Advances the phase machine of every live episode and returns the
    /// state each acting episode must choose an action for.
    fn prepare(&mut self, report: &mut StepReport) -> Result<Vec<(usize, StateVector)>> {
        let mut acting = Vec::new();
        for idx in 0..self.live.len() {
            let vid = self.live[idx].vid;
            if self.world.vehicle(vid).is_none() {
                continue;
            }
            match self.live[idx].phase() {
                Phase::Seeking => {
                    let ep = &self.live[idx];
                    let gap = assess_target_gap(&self.world, vid, ep.target_lane, &self.safety);
                    if gap.accepted {
                        let maneuver = Maneuver {
                            origin: ep.origin_lane,
                            target: ep.target_lane,
                            aborting: false,
                        };
                        self.live[idx].accept_gap()?;
                        self.world.set_maneuver(vid, maneuver);
                        if let Some(v) = self.world.vehicle_mut(vid) {
                            v.omega = 0.0;
                        }
                    }
                    continue;
                }
                Phase::Changing => {
                    if safety_guard(&self.world, &self.live[idx], &self.safety)? == GuardDecision::Abort {
                        self.live[idx].abort()?;
                        self.counters.aborted += 1;
                        report.aborted.push(self.live[idx].id);
                        if let Some(mut m) = self.world.maneuver(vid) {
                            m.aborting = true;
                            self.world.set_maneuver(vid, m);
                        }
                    }
                }
                Phase::Aborting => {}
                Phase::Done | Phase::TimedOut => continue,
            }
            let ep = &self.live[idx];
            let ego = self.world.vehicle(vid).expect("checked above");
            acting.push((idx, build_state(ego, self.world.road(), ep.current_target())?));
        }
        Ok(acting)
    }

    /// One simulation step with `policy` steering every acting episode.
    pub fn step<F>(&mut self, mut policy: F) -> Result<StepReport>
    where
        F: FnMut(&StateVector) -> Action,
    {
        let mut report = StepReport::default();
        let spawned = self.world.spawn_traffic();
        self.issue_commands(&spawned);

        let acting = self.prepare(&mut report)?;
        let mut decisions = Vec::with_capacity(acting.len());
        let mut lateral = Vec::with_capacity(acting.len());
        for (idx, s) in acting {
            let action = policy(&s);
            lateral.push((self.live[idx].vid, action));
            decisions.push((idx, s, action));
        }

        self.world.step(&lateral)?;

        for (idx, s, action) in decisions {
            let ep = &self.live[idx];
            let vid = ep.vid;
            let Some(ego) = self.world.vehicle(vid) else { continue };
            let road = *self.world.road();
            let target = ep.current_target();
            let s_next = build_state(ego, &road, target)?;
            let terms = immediate_reward(
                &self.weights,
                action.yaw_accel(),
                ego.omega,
                road.lane_center(target)? - ego.y,
            );
            let terminal = check_terminal(ego, target, &road)?;
            let omega = ego.omega;
            let transition = Transition {
                s,
                a: action,
                r: terms.r,
                s_next,
                terminal,
            };
            self.live[idx].record(transition, terms, omega)?;
            report.transitions.push((self.live[idx].id, transition));
        }

        self.retire(&mut report);
        Ok(report)
    }

    /// Moves finished episodes out, drops those whose vehicle left the road
    /// and lets aborted vehicles look for a new gap.
    fn retire(&mut self, report: &mut StepReport) {
        let mut still_live = Vec::with_capacity(self.live.len());
        let mut reseek = Vec::new();
        for ep in std::mem::take(&mut self.live) {
            if self.world.vehicle(ep.vid).is_none() {
                if ep.phase().is_acting() {
                    self.counters.truncated += 1;
                }
                continue;
            }
            match ep.phase() {
                Phase::Done | Phase::TimedOut => {
                    self.world.clear_maneuver(ep.vid);
                    self.world.settle_in_lane(ep.vid);
                    if ep.phase() == Phase::Done {
                        self.counters.done += 1;
                        if ep.aborted() {
                            reseek.push((ep.vid, ep.origin_lane, ep.target_lane));
                        }
                    } else {
                        self.counters.timed_out += 1;
                    }
                    report.finished.push(ep);
                }
                _ => still_live.push(ep),
            }
        }
        self.live = still_live;
        for (vid, origin, target) in reseek {
            self.open_episode(vid, origin, target);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::Neighbor;
    use crate::world::RoadGeometry;

    fn scripted_env() -> Environment {
        let world = World::scripted(RoadGeometry::default(), IdmParams::default(), 0.1).unwrap();
        Environment::scripted(world, SafetyParams::default(), RewardWeights::default())
    }

    #[test]
    fn accepted_gap_starts_changing_without_transitions() {
        let mut env = scripted_env();
        let vid = env.world_mut().insert_vehicle(0, 200.0, 25.0, 25.0).unwrap();
        let id = env.command(vid, 1).unwrap();
        let report = env.step(|_| Action::new(0.0)).unwrap();
        assert!(report.transitions.is_empty());
        let ep = env.live_episodes().iter().find(|e| e.id == id).unwrap();
        assert_eq!(ep.phase(), Phase::Changing);
        assert_eq!(ep.transitions().len(), 0);
    }

    #[test]
    fn blocked_gap_keeps_seeking() {
        let mut env = scripted_env();
        let vid = env.world_mut().insert_vehicle(0, 200.0, 25.0, 25.0).unwrap();
        env.world_mut().insert_vehicle(1, 202.0, 25.0, 25.0).unwrap();
        env.command(vid, 1).unwrap();
        env.step(|_| Action::new(0.0)).unwrap();
        assert_eq!(env.live_episodes()[0].phase(), Phase::Seeking);
    }

    #[test]
    fn null_policy_times_out_after_100_steps() {
        let mut env = scripted_env();
        let vid = env.world_mut().insert_vehicle(0, 100.0, 25.0, 25.0).unwrap();
        env.command(vid, 1).unwrap();
        env.step(|_| Action::new(0.0)).unwrap();
        let mut finished = Vec::new();
        for _ in 0..100 {
            let report = env.step(|_| Action::new(0.0)).unwrap();
            finished.extend(report.finished);
        }
        assert_eq!(finished.len(), 1);
        let ep = &finished[0];
        assert_eq!(ep.phase(), Phase::TimedOut);
        assert_eq!(ep.transitions().len(), 100);
        assert!(ep.transitions().iter().all(|t| !t.terminal));
        // null action never moves the vehicle laterally
        assert!(ep.transitions().iter().all(|t| t.s_next.y() == 1.875));
    }

    #[test]
    fn non_adjacent_command_rejected() {
        let mut env = scripted_env();
        let vid = env.world_mut().insert_vehicle(0, 100.0, 25.0, 25.0).unwrap();
        assert!(env.command(vid, 2).is_err());
    }

    /// A fast lag vehicle closes in after acceptance; the guard aborts early
    /// in the maneuver and later states steer for the origin lane.
    #[test]
    fn guard_aborts_before_halfway() {
        let mut env = scripted_env();
        let ego = env.world_mut().insert_vehicle(0, 300.0, 20.0, 20.0).unwrap();
        // lag in lane 1: 60 m back at 24 m/s needs 2 + (576-400)/6 = 31.3 m
        let lag = env.world_mut().insert_vehicle(1, 235.0, 24.0, 40.0).unwrap();
        env.command(ego, 1).unwrap();
        env.step(|_| Action::new(0.0)).unwrap();
        assert_eq!(env.live_episodes()[0].phase(), Phase::Changing);

        // steer until about a fifth of the way across
        let target_y = 1.875 + 0.2 * 3.75;
        while env.world().vehicle(ego).unwrap().y < target_y {
            let report = env.step(|_| Action::new(0.3)).unwrap();
            assert!(report.aborted.is_empty());
        }
        // the lag vehicle accelerates hard
        env.world_mut().vehicle_mut(lag).unwrap().v = 40.0;
        let report = env.step(|_| Action::new(0.3)).unwrap();
        assert_eq!(report.aborted.len(), 1);
        assert_eq!(env.live_episodes()[0].phase(), Phase::Aborting);
        let report = env.step(|_| Action::new(0.0)).unwrap();
        assert_eq!(report.transitions[0].1.s.target_lane(), 0);
    }

    #[test]
    fn guard_commits_past_halfway() {
        let mut env = scripted_env();
        let ego = env.world_mut().insert_vehicle(0, 300.0, 20.0, 20.0).unwrap();
        let id = env.command(ego, 1).unwrap();
        env.step(|_| Action::new(0.0)).unwrap();
        // move the ego to 70% of the lateral distance, then put a vehicle
        // alongside in the target lane
        let y = 1.875 + 0.7 * 3.75;
        env.world_mut().vehicle_mut(ego).unwrap().y = y;
        env.world_mut().insert_vehicle(1, 240.0, 30.0, 30.0).unwrap();
        let ep = env.live_episodes().iter().find(|e| e.id == id).unwrap();
        let gap = assess_target_gap(env.world(), ego, 1, &SafetyParams::default());
        assert!(!gap.accepted);
        assert_eq!(safety_guard(env.world(), ep, &SafetyParams::default()).unwrap(), GuardDecision::Continue);

        env.world_mut().vehicle_mut(ego).unwrap().y = 1.875 + 0.2 * 3.75;
        let ep = env.live_episodes().iter().find(|e| e.id == id).unwrap();
        assert_eq!(safety_guard(env.world(), ep, &SafetyParams::default()).unwrap(), GuardDecision::Abort);
    }

    #[test]
    fn neighbors_include_vehicles_heading_into_the_lane() {
        let mut env = scripted_env();
        let a = env.world_mut().insert_vehicle(0, 300.0, 25.0, 25.0).unwrap();
        let b = env.world_mut().insert_vehicle(2, 301.0, 25.0, 25.0).unwrap();
        env.command(a, 1).unwrap();
        env.command(b, 1).unwrap();
        env.step(|_| Action::new(0.0)).unwrap();
        let phases: Vec<Phase> = env.live_episodes().iter().map(|e| e.phase()).collect();
        assert_eq!(phases, vec![Phase::Changing, Phase::Seeking]);
        let (lead, _) = env.world().target_lane_neighbors(b, 1);
        assert_eq!(lead, None);
        let (_, lag) = env.world().target_lane_neighbors(b, 1);
        assert!(matches!(lag, Some(Neighbor { gap, .. }) if gap < 0.0));
    }
}
