//! Synthetic driving scenarios for training and scoring planners.
//!
//! Each scenario is a unicycle rollout at 4 Hz: 12 s of history (the last
//! 4 s are kept) and a 5 s future, expressed in the ego frame at prediction
//! time. Visual features are a fixed random signature of the scenario
//! category plus Gaussian noise. Every scenario carries three rater plans:
//! the driven future (score 10), a mild lateral perturbation (6 to 9) and a
//! maneuver for a different intent (0 to 5).
//!
//! ```
//! use trajplan_scenariogen::{generate, GenConfig};
//! let cfg = GenConfig { n: 4, d_vis: 8, ..GenConfig::default() };
//! let scenarios = generate(&cfg).unwrap();
//! assert_eq!(scenarios.len(), 4);
//! ```

mod frame;
mod generate;
mod kinematics;

pub use frame::{to_relative_frame, RigidTransform, MIN_HEADING_SPEED};
pub use generate::{generate, generate_one, import_records, Category, GenConfig, GenMode};
pub use kinematics::{intent_from_heading_change, net_heading_change, INTENT_THRESHOLD_DEG, WORLD_HISTORY};

use thiserror::Error;
use trajplan_core::CoreError;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("record {index}: {source}")]
    Record { index: usize, source: CoreError },
}
