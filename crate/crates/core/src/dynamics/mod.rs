//! The reinforcement-learning environment around the lateral controller.

pub mod env;
pub mod episode;
pub mod lateral;
pub mod reward;
pub mod state;

pub use env::{Environment, EpisodeSummary, StepReport};
pub use episode::{check_terminal, LaneChangeEpisode, Phase, Transition, EPISODE_STEP_LIMIT};
pub use lateral::{integrate_lateral, Action, MAX_HEADING, MAX_YAW_ACCEL, MAX_YAW_RATE};
pub use reward::{immediate_reward, RewardTerms, RewardWeights};
pub use state::{build_state, StateVector, STATE_DIM};
