use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lane index {lane} out of range for a {n_lanes}-lane road")]
    LaneOutOfRange { lane: usize, n_lanes: usize },

    #[error("target lane {target} is not adjacent to current lane {current}")]
    NonAdjacentTarget { current: usize, target: usize },

    #[error("nonpositive gap {gap} m to leader")]
    NonPositiveGap { gap: f64 },

    #[error(
        "collision at step {step} in lane {lane}: vehicle {follower} overlaps vehicle {leader} (gap {gap:.3} m)"
    )]
    Collision {
        step: u64,
        lane: usize,
        leader: u64,
        follower: u64,
        gap: f64,
    },

    #[error("input length {got} does not match network input size {expected}")]
    InputLength { expected: usize, got: usize },

    #[error("gradient shape does not match network")]
    ShapeMismatch,

    #[error("non-finite {what}")]
    NonFinite { what: String },

    #[error("episode {0} has already finished")]
    EpisodeFinished(u64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("simulation budget of {0} steps exhausted")]
    Budget(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
