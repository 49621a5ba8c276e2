//! Domain types shared by the planner, the metrics and the scenario generator.
//!
//! Everything is expressed in the ego vehicle frame at prediction time:
//! x points forward, y points left, units are meters and seconds. Time series
//! are sampled at 4 Hz. A history covers the last 4 s (16 states) and a
//! planned trajectory covers the next 5 s (20 waypoints, the first one at
//! t = 0.25 s).

mod error;
pub mod record;
mod types;

pub use error::CoreError;
pub use record::{
    parse_prediction_line, parse_scenario_line, read_predictions, read_scenarios,
    serialize_prediction, serialize_scenario, write_predictions, write_scenarios, PredictionRecord,
    ScenarioRecord,
};
pub use types::{
    validate_scenario, EgoState, EgoStateSequence, Intent, PredictionSet, RaterTrajectory,
    Scenario, Trajectory, VisualFeature,
};

/// Number of past states fed to the encoder (4 s at 4 Hz).
pub const HISTORY_STEPS: usize = 16;
/// Components per past state: x, y, vx, vy, ax, ay.
pub const STATE_DIM: usize = 6;
/// Number of future waypoints (5 s at 4 Hz).
pub const HORIZON: usize = 20;
/// Sampling period in seconds.
pub const DT: f64 = 0.25;
/// Sampling rate in Hz.
pub const RATE_HZ: f64 = 4.0;
/// Default width of the language-image auxiliary embedding.
pub const DEFAULT_AUX_A_DIM: usize = 512;
/// Default width of the self-supervised auxiliary embedding.
pub const DEFAULT_AUX_B_DIM: usize = 768;

/// Waypoint index that corresponds to `seconds` into the future.
///
/// Waypoint `i` sits at `(i + 1) * DT`, so 3 s maps to index 11 and 5 s to 19.
pub fn waypoint_index(seconds: f64) -> Option<usize> {
    let steps = seconds * RATE_HZ;
    if !(steps >= 1.0) || steps.fract() != 0.0 {
        return None;
    }
    let idx = steps as usize - 1;
    (idx < HORIZON).then_some(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waypoint_index_maps_eval_times() {
        assert_eq!(waypoint_index(3.0), Some(11));
        assert_eq!(waypoint_index(5.0), Some(19));
        assert_eq!(waypoint_index(0.25), Some(0));
        assert_eq!(waypoint_index(5.25), None);
        assert_eq!(waypoint_index(0.0), None);
        assert_eq!(waypoint_index(1.1), None);
    }
}
