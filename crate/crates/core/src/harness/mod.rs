//! File formats and run drivers shared by the command line and the tests.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod gradcheck;
pub mod metrics;
pub mod simulate;

pub use checkpoint::{load_checkpoint, parse_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta};
pub use config::Config;
pub use eval::{evaluate, EvalReport};
pub use gradcheck::{run_gradcheck, GradcheckReport};
pub use metrics::{MetricsRow, METRICS_HEADER};
pub use simulate::{simulate, TraceRow, TRACE_HEADER};
