//! Continuous-action Q-learning with a quadratic-in-action value function.

pub mod quadratic;
pub mod replay;
pub mod train;

pub use quadratic::{
    loss_and_gradients, td_target, train_step, BoundMode, LossWorkspace, QGradients, QuadraticQ, UpdateParams,
};
pub use replay::ReplayBuffer;
pub use train::{run_training, run_training_with, Learner, TrainConfig, TrainingOutcome};
