//! The training loop: traffic simulation with exploring lane changers,
//! replay, TD updates and periodic target synchronization.

use rand_chacha::ChaCha8Rng;

use super::quadratic::{train_step, BoundMode, LossWorkspace, QuadraticQ, UpdateParams};
use super::replay::ReplayBuffer;
use crate::dynamics::{Environment, EpisodeSummary};
use crate::harness::checkpoint::CheckpointMeta;
use crate::harness::config::Config;
use crate::harness::metrics::MetricsRow;
use crate::{stream_rng, Error, Result, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_gradient_steps: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub warmup_transitions: usize,
    pub target_sync_period: u64,
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub sigma_anneal_steps: u64,
    pub replay_capacity: usize,
    pub max_grad_norm: f64,
    pub bound_mode: BoundMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_gradient_steps: 40_000,
            gamma: 0.9,
            alpha: 0.01,
            batch_size: 64,
            warmup_transitions: 1_000,
            target_sync_period: 500,
            sigma_start: 0.1,
            sigma_end: 0.01,
            sigma_anneal_steps: 30_000,
            replay_capacity: 50_000,
            max_grad_norm: 10.0,
            bound_mode: BoundMode::Symmetric,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Exploration noise after `step` gradient steps: linear from
    /// `sigma_start` to `sigma_end`, then constant.
    pub fn sigma_at(&self, step: u64) -> f64 {
        if self.sigma_anneal_steps == 0 {
            return self.sigma_end;
        }
        let frac = (step as f64 / self.sigma_anneal_steps as f64).min(1.0);
        self.sigma_start + (self.sigma_end - self.sigma_start) * frac
    }

    pub fn update_params(&self) -> UpdateParams {
        UpdateParams {
            gamma: self.gamma,
            alpha: self.alpha,
            max_grad_norm: self.max_grad_norm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: QuadraticQ,
    pub rows: Vec<MetricsRow>,
    /// Finished episodes in the order they finished.
    pub episodes: Vec<EpisodeSummary>,
    pub env_steps: u64,
    pub target_syncs: u64,
    /// Header for the model's checkpoint.
    pub meta: CheckpointMeta,
}

/// Online/target pair with its replay buffer and random streams.
#[derive(Debug, Clone)]
pub struct Learner {
    pub online: QuadraticQ,
    pub target: QuadraticQ,
    pub buffer: ReplayBuffer,
    config: TrainConfig,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    workspace_losses: u64,
    target_syncs: u64,
}

impl Learner {
    pub fn new(config: TrainConfig) -> Result<Self> {
        let online = QuadraticQ::new(&mut stream_rng(config.seed, Stream::Init), config.bound_mode)?;
        Ok(Self {
            target: online.clone(),
            online,
            buffer: ReplayBuffer::new(config.replay_capacity),
            explore_rng: stream_rng(config.seed, Stream::Exploration),
            replay_rng: stream_rng(config.seed, Stream::Replay),
            config,
            workspace_losses: 0,
            target_syncs: 0,
        })
    }

    pub fn explore_rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.explore_rng
    }

    pub fn gradient_steps(&self) -> u64 {
        self.workspace_losses
    }

    pub fn target_syncs(&self) -> u64 {
        self.target_syncs
    }

    /// One uniform-batch TD update, syncing the target every
    /// `target_sync_period` updates.
    pub fn update(&mut self, ws: &mut LossWorkspace) -> Result<f64> {
        let batch = self.buffer.sample(&mut self.replay_rng, self.config.batch_size);
        let loss = train_step(&mut self.online, &self.target, &batch, &self.config.update_params(), ws)
            .map_err(|e| match e {
                Error::NonFinite { what } => Error::NonFinite {
                    what: format!("{what} at gradient step {}", self.workspace_losses + 1),
                },
                other => other,
            })?;
        self.workspace_losses += 1;
        if self.config.target_sync_period > 0 && self.workspace_losses.is_multiple_of(self.config.target_sync_period) {
            self.target.sync_from(&self.online);
            self.target_syncs += 1;
        }
        Ok(loss)
    }
}

/// Runs the full training protocol: one environment step, then one gradient
/// step whenever the buffer holds at least `warmup_transitions`, until
/// `total_gradient_steps` updates are done. `on_row` sees every metrics row
/// as it is produced.
pub fn run_training_with<F>(config: &Config, mut on_row: F) -> Result<TrainingOutcome>
where
    F: FnMut(&MetricsRow),
{
    config.validate()?;
    let train = &config.train;
    let mut env = Environment::new(&config.scenario, config.idm, config.safety, config.reward)?;
    let mut learner = Learner::new(train.clone())?;
    let mut ws = LossWorkspace::default();
    let mut rows = Vec::with_capacity(train.total_gradient_steps as usize);
    let mut episodes = Vec::new();
    let mut env_steps = 0u64;

    while learner.gradient_steps() < train.total_gradient_steps {
        if env_steps >= config.scenario.max_sim_steps {
            return Err(Error::Budget(config.scenario.max_sim_steps));
        }
        let sigma = train.sigma_at(learner.gradient_steps());
        let online = &learner.online;
        let rng = &mut learner.explore_rng;
        let report = env.step(|s| online.explore_action(&s.normalized(), sigma, rng))?;
        env_steps += 1;
        for (_, t) in report.transitions {
            learner.buffer.push(t);
        }
        episodes.extend(report.finished.iter().map(EpisodeSummary::of));

        if learner.buffer.len() >= train.warmup_transitions {
            let loss = learner.update(&mut ws)?;
            let last = episodes.last();
            let counters = env.counters();
            let row = MetricsRow {
                step: learner.gradient_steps(),
                episode_id: last.map_or(0, |e| e.id),
                loss,
                r: last.map_or(0.0, |e| e.total_return),
                r_acce: last.map_or(0.0, |e| e.r_acce),
                r_rate: last.map_or(0.0, |e| e.r_rate),
                r_time: last.map_or(0.0, |e| e.r_time),
                sigma,
                episodes_done: counters.done,
                episodes_aborted: counters.aborted,
                episodes_timeout: counters.timed_out,
            };
            on_row(&row);
            rows.push(row);
        }
    }

    Ok(TrainingOutcome {
        meta: CheckpointMeta {
            seed: train.seed,
            steps: learner.gradient_steps(),
            config: config.clone(),
        },
        target_syncs: learner.target_syncs(),
        model: learner.online,
        rows,
        episodes,
        env_steps,
    })
}

pub fn run_training(config: &Config) -> Result<TrainingOutcome> {
    run_training_with(config, |_| {})
}
