//! Greedy-policy evaluation on seeded traffic.

use std::io::{self, Write};

use crate::dynamics::{Environment, EpisodeSummary, Phase};
use crate::harness::config::Config;
use crate::qlearn::QuadraticQ;
use crate::{Error, Result};

pub const EVAL_HEADER: &str =
    "episode_id,vid,origin_lane,target_lane,outcome,aborted,steps,r,r_acce,r_rate,r_time,mean_abs_a_yaw,max_abs_omega";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeSummary>,
    /// Reached the target lane without aborting.
    pub completed: usize,
    /// Rejected by the safety guard mid-maneuver.
    pub aborted: usize,
    pub timed_out: usize,
    pub collisions: u64,
    /// Description of the first collision, if any stopped the run.
    pub collision: Option<String>,
    pub sim_steps: u64,
    pub dt: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    fn rate(&self, k: usize) -> f64 {
        if self.episodes.is_empty() {
            0.0
        } else {
            k as f64 / self.episodes.len() as f64
        }
    }

    pub fn completion_rate(&self) -> f64 {
        self.rate(self.completed)
    }

    pub fn abort_rate(&self) -> f64 {
        self.rate(self.aborted)
    }

    pub fn timeout_rate(&self) -> f64 {
        self.rate(self.timed_out)
    }

    /// Mean duration of completed lane changes, s.
    pub fn mean_duration(&self) -> f64 {
        mean(
            self.episodes
                .iter()
                .filter(|e| is_completed(e))
                .map(|e| e.steps as f64 * self.dt),
        )
    }

    pub fn mean_abs_a_yaw(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.mean_abs_a_yaw))
    }

    pub fn max_abs_omega(&self) -> f64 {
        self.episodes.iter().map(|e| e.max_abs_omega).fold(0.0, f64::max)
    }

    pub fn mean_return(&self) -> (f64, f64, f64, f64) {
        let e = &self.episodes;
        (
            mean(e.iter().map(|e| e.total_return)),
            mean(e.iter().map(|e| e.r_acce)),
            mean(e.iter().map(|e| e.r_rate)),
            mean(e.iter().map(|e| e.r_time)),
        )
    }

    pub fn summary(&self) -> String {
        let (r, acce, rate, time) = self.mean_return();
        format!(
            "episodes {}\ncompletion_rate {:.4}\nabort_rate {:.4}\ntimeout_rate {:.4}\n\
             mean_completion_duration_s {}\nmean_abs_a_yaw {:.5}\nmax_abs_omega {:.5}\n\
             mean_r {:.5}\nmean_r_acce {:.5}\nmean_r_rate {:.5}\nmean_r_time {:.5}\ncollisions {}\n",
            self.episodes.len(),
            self.completion_rate(),
            self.abort_rate(),
            self.timeout_rate(),
            if self.completed > 0 { format!("{:.3}", self.mean_duration()) } else { "n/a".into() },
            self.mean_abs_a_yaw(),
            self.max_abs_omega(),
            r,
            acce,
            rate,
            time,
            self.collisions
        )
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{EVAL_HEADER}")?;
        for e in &self.episodes {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                e.id,
                e.vid,
                e.origin_lane,
                e.target_lane,
                outcome_name(e),
                e.aborted as u8,
                e.steps,
                e.total_return,
                e.r_acce,
                e.r_rate,
                e.r_time,
                e.mean_abs_a_yaw,
                e.max_abs_omega
            )?;
        }
        Ok(())
    }
}

fn is_completed(e: &EpisodeSummary) -> bool {
    e.outcome == Phase::Done && !e.aborted
}

pub fn outcome_name(e: &EpisodeSummary) -> &'static str {
    if e.aborted {
        "aborted"
    } else if e.outcome == Phase::Done {
        "done"
    } else {
        "timeout"
    }
}

/// Runs the greedy policy on traffic seeded with `seed` until `n_episodes`
/// lane changes have finished. A collision ends the run early and is
/// reported rather than returned as an error.
pub fn evaluate(model: &QuadraticQ, config: &Config, n_episodes: usize, seed: u64) -> Result<EvalReport> {
    let config = config.clone().with_seed(seed);
    config.validate()?;
    let scenario = &config.scenario;
    let mut env = Environment::new(scenario, config.idm, config.safety, config.reward)?;
    let mut report = EvalReport {
        episodes: Vec::with_capacity(n_episodes),
        completed: 0,
        aborted: 0,
        timed_out: 0,
        collisions: 0,
        collision: None,
        sim_steps: 0,
        dt: scenario.dt,
    };
    while report.episodes.len() < n_episodes {
        if report.sim_steps >= scenario.max_sim_steps {
            return Err(Error::Budget(scenario.max_sim_steps));
        }
        let step = env.step(|s| model.greedy_action(&s.normalized()));
        report.sim_steps += 1;
        match step {
            Ok(r) => report.episodes.extend(r.finished.iter().map(EpisodeSummary::of)),
            Err(e @ Error::Collision { .. }) => {
                report.collisions += 1;
                report.collision = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    report.episodes.truncate(n_episodes);
    let count = |f: fn(&EpisodeSummary) -> bool| report.episodes.iter().filter(|e| f(e)).count();
    let (completed, aborted) = (count(is_completed), count(|e| e.aborted));
    report.timed_out = report.episodes.len() - completed - aborted;
    report.completed = completed;
    report.aborted = aborted;
    Ok(report)
}
