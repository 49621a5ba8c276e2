use trajplan_core::{waypoint_index, PredictionSet, Trajectory};

use crate::MetricError;

/// Mean waypoint distance between `pred` and `target` over the first
/// `seconds` of the horizon.
pub fn ade(pred: &Trajectory, target: &Trajectory, seconds: f64) -> Result<f64, MetricError> {
    let n = waypoint_index(seconds).ok_or(MetricError::BadTime(seconds))? + 1;
    for t in [pred, target] {
        if t.len() < n {
            return Err(MetricError::TooShort { len: t.len(), need: n });
        }
    }
    let total: f64 = pred.waypoints[..n]
        .iter()
        .zip(&target.waypoints[..n])
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .sum();
    Ok(total / n as f64)
}

/// Smallest [`ade`] among the `k` most probable modes.
pub fn ade_topk(preds: &PredictionSet, target: &Trajectory, k: usize, seconds: f64) -> Result<f64, MetricError> {
    if k == 0 || k > preds.k() {
        return Err(MetricError::KOutOfRange { k, modes: preds.k() });
    }
    let mut best = f64::INFINITY;
    for &m in preds.ranked_indices().iter().take(k) {
        best = best.min(ade(&preds.modes[m], target, seconds)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use trajplan_core::HORIZON;

    fn ramp(scale: f64) -> Trajectory {
        Trajectory { waypoints: (0..HORIZON).map(|i| [i as f64 * scale, 0.0]).collect() }
    }

    #[test]
    fn exact_match_is_zero() {
        let t = ramp(1.0);
        let p = PredictionSet::new(vec![ramp(2.0), t.clone()], vec![0.6, 0.4]).unwrap();
        assert_eq!(ade_topk(&p, &t, 2, 5.0).unwrap(), 0.0);
        assert!(ade_topk(&p, &t, 1, 5.0).unwrap() > 0.0);
    }

    #[test]
    fn constant_offset() {
        let t = ramp(1.0);
        let p = PredictionSet::single(t.translated(1.0, 0.0));
        assert_eq!(ade_topk(&p, &t, 1, 5.0).unwrap(), 1.0);
        assert_eq!(ade_topk(&p, &t, 1, 3.0).unwrap(), 1.0);
        assert_eq!(ade(&t.translated(0.0, -1.0), &t, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn horizon_cutoff() {
        let t = Trajectory::zeros();
        let mut p = t.clone();
        p.waypoints[12] = [100.0, 0.0]; // after 3 s
        assert_eq!(ade(&p, &t, 3.0).unwrap(), 0.0);
        assert_eq!(ade(&p, &t, 5.0).unwrap(), 5.0);
    }

    #[test]
    fn k_range() {
        let t = ramp(1.0);
        let p = PredictionSet::single(t.clone());
        assert_eq!(ade_topk(&p, &t, 0, 5.0), Err(MetricError::KOutOfRange { k: 0, modes: 1 }));
        assert_eq!(ade_topk(&p, &t, 2, 5.0), Err(MetricError::KOutOfRange { k: 2, modes: 1 }));
    }
}
