//! Winner-take-all training for the trajectory planner.
//!
//! Each step picks, per sample, the mode closest to the driven future (mean
//! waypoint distance, ties to the lowest index), then minimizes cross-entropy
//! on that mode's logit plus the mean squared waypoint error of that mode
//! alone. Parameters are updated with Adam.
//!
//! ```no_run
//! use trajplan_training::{train, TrainConfig};
//! # let scenarios = Vec::new();
//! let ckpt = train(&scenarios, TrainConfig { epochs: 5, ..TrainConfig::default() })?;
//! ckpt.save(std::path::Path::new("model.ckpt"))?;
//! # Ok::<(), trajplan_training::TrainError>(())
//! ```

mod adam;
mod checkpoint;
mod config;
mod loss;
mod split;
mod trainer;

pub use adam::{adam_step, clip_grad_norm, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, RngState, MAGIC};
pub use config::{Ablation, LrSchedule, TrainConfig};
pub use loss::{closest_mode, wta_loss, wta_loss_graph, DEFAULT_LAMBDA};
pub use split::{split_dataset, SPLIT_STREAM};
pub use trainer::{train, write_log_csv, EpochLog, Trainer, LOG_HEADER, SHUFFLE_STREAM};

use thiserror::Error;
use trajplan_diffmath::DiffError;
use trajplan_metrics::MetricError;
use trajplan_model::ModelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid training config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged in epoch {epoch} after {step} steps: loss = {loss}")]
    Diverged { epoch: usize, step: u64, loss: f64 },
    #[error("training diverged in epoch {epoch} at step {step}: {what} is not finite")]
    NonFinite { epoch: usize, step: u64, what: String },
    #[error("bad checkpoint: {0}")]
    Format(String),
}
