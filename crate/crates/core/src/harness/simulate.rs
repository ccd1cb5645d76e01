//! Traffic simulation with per-vehicle trace output.

use std::io::{self, Write};

use crate::dynamics::{Environment, Phase};
use crate::harness::config::Config;
use crate::qlearn::QuadraticQ;
use crate::world::{VehicleId, World};
use crate::Result;

pub const TRACE_HEADER: &str = "step,t,vid,lane,x,y,v,a,theta,omega,phase";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub t: f64,
    pub vid: VehicleId,
    pub lane: usize,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub theta: f64,
    pub omega: f64,
    /// `cruise` or the phase of the vehicle's lane-change episode.
    pub phase: &'static str,
}

fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Seeking => "seeking",
        Phase::Changing => "changing",
        Phase::Aborting => "aborting",
        Phase::Done => "done",
        Phase::TimedOut => "timeout",
    }
}

impl TraceRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step, self.t, self.vid, self.lane, self.x, self.y, self.v, self.a, self.theta, self.omega, self.phase
        )
    }
}

pub fn write_trace<W: Write>(out: &mut W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(())
}

fn snapshot(world: &World, step: u64, phase_of: impl Fn(VehicleId) -> &'static str, rows: &mut Vec<TraceRow>) {
    let t = step as f64 * world.dt();
    for v in world.vehicles() {
        rows.push(TraceRow {
            step,
            t,
            vid: v.vid,
            lane: v.lane_index,
            x: v.x,
            y: v.y,
            v: v.v,
            a: v.a,
            theta: v.theta,
            omega: v.omega,
            phase: phase_of(v.vid),
        });
    }
}

/// Simulates `steps` steps and records every vehicle after each one. With a
/// model, vehicles receive lane-change commands and the greedy policy steers;
/// without one the run is car-following traffic only.
pub fn simulate(config: &Config, steps: u64, model: Option<&QuadraticQ>) -> Result<Vec<TraceRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    match model {
        None => {
            let mut world = World::new(&config.scenario, config.idm)?;
            for step in 1..=steps {
                world.tick(&[])?;
                snapshot(&world, step, |_| "cruise", &mut rows);
            }
        }
        Some(q) => {
            let mut env = Environment::new(&config.scenario, config.idm, config.safety, config.reward)?;
            for step in 1..=steps {
                env.step(|s| q.greedy_action(&s.normalized()))?;
                let live = env.live_episodes();
                let phase_of = |vid: VehicleId| {
                    live.iter()
                        .find(|e| e.vid == vid)
                        .map_or("cruise", |e| phase_name(e.phase()))
                };
                snapshot(env.world(), step, phase_of, &mut rows);
            }
        }
    }
    Ok(rows)
}
