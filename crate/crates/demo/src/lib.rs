//! Browser bindings: IDM response curves, a live traffic view and greedy
//! lane-change rollouts from a pasted checkpoint.

use wasm_bindgen::prelude::*;

use lanechange::dynamics::{Environment, Phase, RewardWeights};
use lanechange::gap::SafetyParams;
use lanechange::harness::checkpoint::read_checkpoint;
use lanechange::harness::Config;
use lanechange::idm::{idm_accel, IdmParams, Leader};
use lanechange::qlearn::{BoundMode, QuadraticQ};
use lanechange::world::{kmh_to_ms, RoadGeometry, World};
use lanechange::{stream_rng, Stream};

/// IDM acceleration against a leader at `leader_speed` for gaps 1..=max_gap
/// m in 1 m steps, for a follower at `speed` with limit `v_limit_kmh`.
pub fn idm_response(speed: f64, leader_speed: f64, v_limit_kmh: f64, max_gap: usize) -> Result<Vec<f64>, String> {
    let params = IdmParams::default();
    let v_limit = kmh_to_ms(v_limit_kmh);
    (1..=max_gap)
        .map(|gap| {
            idm_accel(
                &params,
                speed,
                v_limit,
                Some(Leader {
                    gap: gap as f64,
                    speed: leader_speed,
                }),
            )
            .map_err(|e| e.to_string())
        })
        .collect()
}

#[wasm_bindgen]
pub fn idm_curve(speed: f64, leader_speed: f64, v_limit_kmh: f64, max_gap: usize) -> Result<Vec<f64>, JsError> {
    idm_response(speed, leader_speed, v_limit_kmh, max_gap).map_err(|e| JsError::new(&e))
}

/// Stochastic three-lane traffic, car following only.
#[wasm_bindgen]
pub struct TrafficView {
    world: World,
}

#[wasm_bindgen]
impl TrafficView {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<TrafficView, JsError> {
        let config = Config::default().with_seed(seed);
        let world = World::new(&config.scenario, config.idm).map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Self { world })
    }

    /// Advances `n` steps of 0.1 s.
    pub fn advance(&mut self, n: u32) -> Result<(), JsError> {
        for _ in 0..n {
            self.world.tick(&[]).map_err(|e| JsError::new(&e.to_string()))?;
        }
        Ok(())
    }

    /// Flat `[x, y, v, ...]` for every vehicle on the road.
    pub fn vehicles(&self) -> Vec<f64> {
        self.world.vehicles().iter().flat_map(|v| [v.x, v.y, v.v]).collect()
    }

    pub fn time(&self) -> f64 {
        self.world.step_count() as f64 * self.world.dt()
    }

    pub fn segment_length(&self) -> f64 {
        self.world.road().segment_length
    }

    pub fn road_width(&self) -> f64 {
        self.world.road().road_width()
    }
}

/// One greedy lane change on an empty road.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Rows of `[t, y, theta, omega, a_yaw]`.
    pub samples: Vec<[f64; 5]>,
    pub done: bool,
    pub total_return: f64,
}

/// Greedy rollout of `model` from lane 1 to `target` at `speed` m/s.
pub fn greedy_rollout(model: &QuadraticQ, speed: f64, target: usize) -> Result<Rollout, String> {
    let err = |e: lanechange::Error| e.to_string();
    let mut world = World::scripted(RoadGeometry::default(), IdmParams::default(), 0.1).map_err(err)?;
    let vid = world.insert_vehicle(1, 50.0, speed, speed).map_err(err)?;
    let mut env = Environment::scripted(world, SafetyParams::default(), RewardWeights::default());
    env.command(vid, target).map_err(err)?;
    let mut samples = Vec::new();
    for step in 0..120u32 {
        let mut a_yaw = 0.0;
        let report = env
            .step(|s| {
                let a = model.greedy_action(&s.normalized());
                a_yaw = a.yaw_accel();
                a
            })
            .map_err(err)?;
        if let Some(v) = env.world().vehicle(vid) {
            samples.push([(step + 1) as f64 * 0.1, v.y, v.theta, v.omega, a_yaw]);
        }
        if let Some(ep) = report.finished.first() {
            return Ok(Rollout {
                samples,
                done: ep.phase() == Phase::Done,
                total_return: ep.total_return(),
            });
        }
    }
    Err("episode did not finish".into())
}

/// Model from checkpoint text, or a freshly initialized one for empty text.
pub fn model_from_text(text: &str) -> Result<QuadraticQ, String> {
    if text.trim().is_empty() {
        QuadraticQ::new(&mut stream_rng(0, Stream::Init), BoundMode::Symmetric).map_err(|e| e.to_string())
    } else {
        read_checkpoint(text).map_err(|e| e.to_string())
    }
}

/// Greedy lane-change rollout for the page: flat rows of
/// `[t, y, theta, omega, a_yaw]` followed by `[done, total_return]`.
#[wasm_bindgen]
pub fn lane_change(checkpoint: &str, speed: f64, target: usize) -> Result<Vec<f64>, JsError> {
    let model = model_from_text(checkpoint).map_err(|e| JsError::new(&e))?;
    let r = greedy_rollout(&model, speed, target).map_err(|e| JsError::new(&e))?;
    let mut out: Vec<f64> = r.samples.iter().flatten().copied().collect();
    out.push(if r.done { 1.0 } else { 0.0 });
    out.push(r.total_return);
    Ok(out)
}
