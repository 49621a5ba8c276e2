use serde::{Deserialize, Serialize};
use trajplan_core::{waypoint_index, RaterTrajectory, Trajectory};

use crate::MetricError;

/// Score assigned to any out-of-region plan whose decayed score would be lower.
pub const RFS_FLOOR: f64 = 4.0;

/// The two time points at which plans are scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalTime {
    Three,
    Five,
}

impl EvalTime {
    pub const ALL: [EvalTime; 2] = [EvalTime::Three, EvalTime::Five];

    pub fn seconds(self) -> f64 {
        match self {
            EvalTime::Three => 3.0,
            EvalTime::Five => 5.0,
        }
    }
}

/// Unscaled trust-region half-widths at one evaluation time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrustThresholds {
    pub t: EvalTime,
    pub eta_lat_base: f64,
    pub eta_long_base: f64,
}

impl TrustThresholds {
    pub fn base(t: EvalTime) -> Self {
        match t {
            EvalTime::Three => Self { t, eta_lat_base: 1.0, eta_long_base: 4.0 },
            EvalTime::Five => Self { t, eta_lat_base: 1.8, eta_long_base: 7.2 },
        }
    }
}

/// Piecewise-linear trust-region scale: 0.5 below 1.4 m/s, 1.0 from 11 m/s,
/// linear in between.
pub fn speed_scale(v: f64) -> Result<f64, MetricError> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(MetricError::BadSpeed(v));
    }
    Ok(if v < 1.4 {
        0.5
    } else if v < 11.0 {
        0.5 + 0.5 * (v - 1.4) / (11.0 - 1.4)
    } else {
        1.0
    })
}

/// `(eta_lat, eta_long)` at time `t` for a rater whose initial speed is `v`.
pub fn scaled_thresholds(t: EvalTime, v: f64) -> Result<(f64, f64), MetricError> {
    let s = speed_scale(v)?;
    let base = TrustThresholds::base(t);
    Ok((s * base.eta_lat_base, s * base.eta_long_base))
}

/// Offset of a plan from a rater plan at one time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLong {
    /// Along the rater's left normal, meters.
    pub lat: f64,
    /// Along the rater's heading, meters.
    pub long: f64,
    /// Euclidean distance, meters.
    pub delta: f64,
}

/// Unit tangent of `t` at waypoint `i` from finite differences: central in
/// the interior, one-sided at the ends, `+x` when the trajectory does not move.
fn heading_at(t: &[[f64; 2]], i: usize) -> [f64; 2] {
    let n = t.len();
    let (a, b) = if n < 2 {
        return [1.0, 0.0];
    } else if i == 0 {
        (0, 1)
    } else if i == n - 1 {
        (n - 2, n - 1)
    } else {
        (i - 1, i + 1)
    };
    let (dx, dy) = (t[b][0] - t[a][0], t[b][1] - t[a][1]);
    let norm = dx.hypot(dy);
    if norm > 0.0 && norm.is_finite() {
        [dx / norm, dy / norm]
    } else {
        [1.0, 0.0]
    }
}

/// Decomposes `pred(T) - rater(T)` along the rater's heading at `T`.
pub fn lat_long_error(pred: &Trajectory, rater: &Trajectory, seconds: f64) -> Result<LatLong, MetricError> {
    let i = waypoint_index(seconds).ok_or(MetricError::BadTime(seconds))?;
    for t in [pred, rater] {
        if t.len() <= i {
            return Err(MetricError::TooShort { len: t.len(), need: i + 1 });
        }
    }
    let h = heading_at(&rater.waypoints, i);
    let (p, r) = (pred.waypoints[i], rater.waypoints[i]);
    let (dx, dy) = (p[0] - r[0], p[1] - r[1]);
    Ok(LatLong {
        lat: -h[1] * dx + h[0] * dy,
        long: h[0] * dx + h[1] * dy,
        delta: dx.hypot(dy),
    })
}

/// Index of the rater closest to `pred` at `t`; ties go to the higher score,
/// then to the lower index.
pub fn closest_rater(pred: &Trajectory, raters: &[RaterTrajectory], t: EvalTime) -> Result<usize, MetricError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in raters.iter().enumerate() {
        let d = lat_long_error(pred, &r.trajectory, t.seconds())?.delta;
        best = match best {
            Some((j, bd)) if bd < d || (bd == d && raters[j].score >= r.score) => Some((j, bd)),
            _ => Some((i, d)),
        };
    }
    best.map(|(i, _)| i).ok_or(MetricError::NoRaters)
}

/// Rater feedback score of one plan at one time point.
///
/// If the plan lies inside the trust region of at least one rater, the score
/// is the highest score among those raters. Otherwise it is
/// `max(4, x * 0.1^clamp(d - 0.5, 0, 1))`, where `x` is the closest rater's
/// score and `d` the distance to it.
pub fn rfs_single(pred: &Trajectory, raters: &[RaterTrajectory], t: EvalTime) -> Result<f64, MetricError> {
    if raters.is_empty() {
        return Err(MetricError::NoRaters);
    }
    let mut in_region: Option<f64> = None;
    for r in raters {
        let e = lat_long_error(pred, &r.trajectory, t.seconds())?;
        let (eta_lat, eta_long) = scaled_thresholds(t, r.initial_speed)?;
        if e.lat.abs() <= eta_lat && e.long.abs() <= eta_long {
            in_region = Some(in_region.map_or(r.score, |s| s.max(r.score)));
        }
    }
    if let Some(s) = in_region {
        return Ok(s);
    }
    let c = closest_rater(pred, raters, t)?;
    let delta = lat_long_error(pred, &raters[c].trajectory, t.seconds())?.delta;
    let decayed = raters[c].score * 0.1f64.powf((delta - 0.5).clamp(0.0, 1.0));
    Ok(decayed.max(RFS_FLOOR))
}

/// Per-sample score: the mean of [`rfs_single`] at 3 s and 5 s for the
/// plan.
pub(crate) fn rfs_sample(pred: &Trajectory, raters: &[RaterTrajectory]) -> Result<[f64; 2], MetricError> {
    Ok([rfs_single(pred, raters, EvalTime::Three)?, rfs_single(pred, raters, EvalTime::Five)?])
}
