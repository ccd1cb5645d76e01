//! Highway lane-change simulation with a continuous-action Q-learning
//! lateral controller.
//!
//! The crate is split along the controller boundaries of the system:
//!
//! - [`world`]: road geometry, traffic generation and the fixed-step clock.
//! - [`idm`]: longitudinal acceleration (Intelligent Driver Model).
//! - [`gap`]: gap acceptance at initiation and the in-maneuver safety guard.
//! - [`dynamics`]: the RL environment: state, lateral kinematics, rewards and
//!   the lane-change episode phase machine.
//! - [`nn`]: small dense networks with analytic backpropagation.
//! - [`qlearn`]: the quadratic Q approximator, replay, target network and the
//!   training loop.
//! - [`harness`]: configuration files, checkpoints, metrics and evaluation.

pub mod dynamics;
pub mod error;
pub mod gap;
pub mod harness;
pub mod idm;
pub mod nn;
pub mod qlearn;
pub mod world;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Traffic = 1,
    Commands = 2,
    Init = 3,
    Exploration = 4,
    Replay = 5,
    Diagnostics = 6,
}

/// Seeded generator for one named stream. ChaCha8 output is stable across
/// platforms and crate versions, which the determinism guarantees rely on.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
