//! Planning metrics.
//!
//! * [`rfs_single`] / [`rfs_batch`]: the rater feedback score. A plan is
//!   compared at 3 s and 5 s against up to three rater-scored reference
//!   plans. Inside a rater's speed-scaled trust region the plan inherits that
//!   rater's score; outside every trust region the score decays exponentially
//!   with the distance to the closest rater, floored at 4.
//! * [`ade`] / [`ade_topk`]: average displacement error against the driven
//!   future, optionally the minimum over the k most probable modes.

mod ade;
mod report;
mod rfs;

pub use ade::{ade, ade_topk};
pub use report::{evaluate, rfs_batch, MetricReport, RfsReport};
pub use rfs::{
    closest_rater, lat_long_error, rfs_single, scaled_thresholds, speed_scale,
    EvalTime, LatLong, TrustThresholds, RFS_FLOOR,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("speed must be a finite value >= 0, got {0}")]
    BadSpeed(f64),
    #[error("time {0} s is not covered by a 20-waypoint horizon at 4 Hz")]
    BadTime(f64),
    #[error("trajectory has {len} waypoints, {need} needed")]
    TooShort { len: usize, need: usize },
    #[error("no rater trajectories")]
    NoRaters,
    #[error("{preds} prediction sets for {scenarios} scenarios")]
    LengthMismatch { preds: usize, scenarios: usize },
    #[error("k = {k} outside 1..={modes}")]
    KOutOfRange { k: usize, modes: usize },
}
