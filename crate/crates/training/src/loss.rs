use trajplan_core::{PredictionSet, Trajectory, HORIZON};
use trajplan_diffmath::{Graph, Tensor, Var};

use crate::TrainError;

/// Regression weight of the winner-take-all loss.
pub const DEFAULT_LAMBDA: f64 = 1.0;

fn mean_displacement(mode: &[f64], target: &Trajectory) -> f64 {
    let mut total = 0.0;
    for (t, w) in target.waypoints.iter().enumerate() {
        total += (mode[2 * t] - w[0]).hypot(mode[2 * t + 1] - w[1]);
    }
    total / target.len() as f64
}

/// Index of the mode with the smallest mean waypoint distance to `target`,
/// ties to the lowest index. `modes` holds `K` trajectories of 20 waypoints,
/// flattened.
pub fn closest_mode(modes: &[f64], target: &Trajectory) -> usize {
    let stride = HORIZON * 2;
    let mut best = (0, f64::INFINITY);
    for (k, m) in modes.chunks(stride).enumerate() {
        let d = mean_displacement(m, target);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Winner-take-all loss of one prediction set: `-ln p[c] + λ · mean_t
/// |mode_c(t) - target(t)|²`, where `c` is the closest mode. Returns the loss
/// and `c`.
pub fn wta_loss(pred: &PredictionSet, target: &Trajectory, lambda: f64) -> (f64, usize) {
    let flat: Vec<f64> = pred.modes.iter().flat_map(|m| m.waypoints.iter().flatten().copied()).collect();
    let c = closest_mode(&flat, target);
    let mut sq = 0.0;
    for (p, q) in pred.modes[c].waypoints.iter().zip(&target.waypoints) {
        sq += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    }
    (-pred.probs[c].ln() + lambda * sq / target.len() as f64, c)
}

/// Batch-mean winner-take-all loss on the tape.
///
/// `trajectories: [B, K, 20, 2]`, `logits: [B, K]`. The closest mode is
/// chosen from the current values and treated as a constant, so the
/// regression term reaches only that mode and the classification term only
/// the logits.
pub fn wta_loss_graph(
    g: &mut Graph,
    trajectories: Var,
    logits: Var,
    targets: &[&Trajectory],
    lambda: f64,
) -> Result<(Var, Vec<usize>), TrainError> {
    let shape = g.shape(trajectories).to_vec();
    let b = targets.len();
    if shape.len() != 4 || shape[0] != b || shape[2] != HORIZON || shape[3] != 2 || g.shape(logits) != [b, shape[1]] {
        return Err(TrainError::Shape(format!(
            "trajectories {shape:?}, logits {:?}, {b} targets",
            g.shape(logits)
        )));
    }
    let stride = shape[1] * HORIZON * 2;
    let closest: Vec<usize> = {
        let v = g.value(trajectories).data();
        targets.iter().enumerate().map(|(i, t)| closest_mode(&v[i * stride..(i + 1) * stride], t)).collect()
    };
    let logp = g.log_softmax(logits, 1)?;
    let picked = g.gather(logp, &closest)?;
    let ce = g.mean(picked);
    let ce = g.scale(ce, -1.0);
    let sel = g.gather(trajectories, &closest)?;
    let target = Tensor::new([b, HORIZON, 2], targets.iter().flat_map(|t| t.waypoints.iter().flatten().copied()).collect())?;
    let target = g.constant(target);
    let diff = g.sub(sel, target)?;
    let sq = g.sum_sq(diff);
    let reg = g.scale(sq, lambda / (b * HORIZON) as f64);
    Ok((g.add(ce, reg)?, closest))
}
