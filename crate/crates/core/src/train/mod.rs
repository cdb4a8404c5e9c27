//! Optimization: cosine learning-rate decay, global-norm clipping, AdamW and
//! the step loop.

mod config;
mod loop_;
mod optim;
mod schedule;

pub use config::TrainConfig;
pub use loop_::{read_history_csv, train, write_history_csv, StepRecord, TrainOutcome};
pub use optim::{adamw_step, clip_grad_norm, global_norm, OptimizerState};
pub use schedule::cosine_lr;
