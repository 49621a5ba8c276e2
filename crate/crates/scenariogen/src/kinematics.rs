use trajplan_core::{EgoState, EgoStateSequence, Intent, Trajectory, DT, HISTORY_STEPS, HORIZON};

use crate::frame::MIN_HEADING_SPEED;

/// Steps of simulated history (12 s at 4 Hz); only the last
/// [`HISTORY_STEPS`] are kept.
pub const WORLD_HISTORY: usize = 48;
/// Index of the pose at prediction time.
pub(crate) const NOW: usize = WORLD_HISTORY - 1;
pub(crate) const TOTAL: usize = WORLD_HISTORY + HORIZON;

/// Net heading change (degrees) beyond which a future counts as a turn.
pub const INTENT_THRESHOLD_DEG: f64 = 15.0;

/// Longitudinal/yaw control program, started at an onset step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Maneuver {
    Cruise,
    /// Constant yaw rate until `yaw` radians have been turned.
    Turn { yaw: f64, steps: usize },
    /// Constant deceleration until standstill.
    Stop { decel: f64 },
    /// Constant deceleration for `steps`, then hold speed.
    Brake { decel: f64, steps: usize },
    /// Lateral shift: yaw up to `peak_yaw` over `steps`, back to zero over
    /// another `steps`.
    Shift { peak_yaw: f64, steps: usize },
}

impl Maneuver {
    /// (acceleration, yaw rate) `j` steps after onset.
    fn control(&self, j: usize) -> (f64, f64) {
        match *self {
            Maneuver::Cruise => (0.0, 0.0),
            Maneuver::Turn { yaw, steps } => (0.0, if j < steps { yaw / (steps as f64 * DT) } else { 0.0 }),
            Maneuver::Stop { decel } => (-decel, 0.0),
            Maneuver::Brake { decel, steps } => (if j < steps { -decel } else { 0.0 }, 0.0),
            Maneuver::Shift { peak_yaw, steps } => {
                let w = peak_yaw / (steps as f64 * DT);
                (0.0, if j < steps { w } else if j < 2 * steps { -w } else { 0.0 })
            }
        }
    }
}

/// Initial condition of a unicycle rollout.
pub(crate) struct Start {
    pub pos: [f64; 2],
    pub yaw: f64,
    pub speed: f64,
    /// Added to the speed after each step; `TOTAL - 1` entries.
    pub speed_noise: Vec<f64>,
}

/// Integrates a unicycle over [`TOTAL`] positions at 4 Hz. `program` lists
/// `(onset, maneuver)` pairs; at each step the pair with the latest onset
/// not after that step is in control.
pub(crate) fn rollout(start: &Start, program: &[(usize, Maneuver)]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(TOTAL);
    let (mut pos, mut yaw, mut v) = (start.pos, start.yaw, start.speed);
    out.push(pos);
    for k in 0..TOTAL - 1 {
        pos = [pos[0] + v * DT * yaw.cos(), pos[1] + v * DT * yaw.sin()];
        out.push(pos);
        let active = program.iter().filter(|(on, _)| *on <= k).max_by_key(|(on, _)| *on);
        let (a, w) = active.map_or((0.0, 0.0), |(on, m)| m.control(k - on));
        v = (v + a * DT + start.speed_noise[k]).max(0.0);
        yaw += w * DT;
    }
    out
}

fn velocity(p: &[[f64; 2]], i: usize) -> [f64; 2] {
    [(p[i + 1][0] - p[i][0]) / DT, (p[i + 1][1] - p[i][1]) / DT]
}

/// Ego states at the [`HISTORY_STEPS`] positions ending at `now`, with
/// forward-difference velocities and accelerations. Needs `p[now + 2]`.
pub(crate) fn states_from_positions(p: &[[f64; 2]], now: usize) -> EgoStateSequence {
    let steps = (now + 1 - HISTORY_STEPS..=now)
        .map(|i| {
            let (v, w) = (velocity(p, i), velocity(p, i + 1));
            EgoState { x: p[i][0], y: p[i][1], vx: v[0], vy: v[1], ax: (w[0] - v[0]) / DT, ay: (w[1] - v[1]) / DT }
        })
        .collect();
    EgoStateSequence { steps }
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = a.rem_euclid(t);
    if r > std::f64::consts::PI {
        r - t
    } else {
        r
    }
}

/// Heading change in radians between the ego velocity at prediction time
/// and the last moving segment of the future, counterclockwise positive.
pub fn net_heading_change(history: &EgoStateSequence, future: &Trajectory) -> f64 {
    let Some(last) = history.last() else { return 0.0 };
    let start = history
        .steps
        .iter()
        .rev()
        .find(|s| s.speed() > MIN_HEADING_SPEED)
        .map_or(0.0, |s| s.vy.atan2(s.vx));
    let mut pts = vec![[last.x, last.y]];
    pts.extend_from_slice(&future.waypoints);
    let end = pts.windows(2).rev().find_map(|w| {
        let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
        (dx.hypot(dy) > MIN_HEADING_SPEED * DT).then(|| dy.atan2(dx))
    });
    end.map_or(0.0, |e| wrap(e - start))
}

/// Straight within ±15° of net heading change, otherwise Left or Right by sign.
pub fn intent_from_heading_change(radians: f64) -> Intent {
    let deg = radians.to_degrees();
    if deg > INTENT_THRESHOLD_DEG {
        Intent::Left
    } else if deg < -INTENT_THRESHOLD_DEG {
        Intent::Right
    } else {
        Intent::Straight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_velocity_states() {
        let p: Vec<[f64; 2]> = (0..20).map(|i| [5.0 * 0.25 * i as f64, 0.0]).collect();
        let s = states_from_positions(&p, 17);
        for (k, st) in s.steps.iter().enumerate() {
            assert_eq!(st.x, 1.25 * (k + 2) as f64);
            assert_eq!((st.vx, st.vy, st.ax, st.ay), (5.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn turn_program_turns() {
        let start = Start { pos: [0.0, 0.0], yaw: 0.0, speed: 8.0, speed_noise: vec![0.0; TOTAL - 1] };
        let turn = Maneuver::Turn { yaw: 60f64.to_radians(), steps: 12 };
        let p = rollout(&start, &[(NOW + 1, turn)]);
        let straight = rollout(&start, &[]);
        assert_eq!(p[..NOW + 3], straight[..NOW + 3]);
        let h = states_from_positions(&p, NOW);
        let f = Trajectory { waypoints: p[NOW + 1..].to_vec() };
        assert!((net_heading_change(&h, &f).to_degrees() - 60.0).abs() < 1e-9);
        assert_eq!(intent_from_heading_change(net_heading_change(&h, &f)), Intent::Left);
    }

    #[test]
    fn stop_holds_position() {
        let start = Start { pos: [0.0, 0.0], yaw: 1.0, speed: 5.0, speed_noise: vec![0.0; TOTAL - 1] };
        let p = rollout(&start, &[(NOW + 1, Maneuver::Stop { decel: 4.0 })]);
        assert_eq!(p[TOTAL - 1], p[TOTAL - 3]);
        let h = states_from_positions(&p, NOW);
        let f = Trajectory { waypoints: p[NOW + 1..].to_vec() };
        assert!(net_heading_change(&h, &f).abs() < 1e-9);
    }

    #[test]
    fn wrap_range() {
        assert!((wrap(3.5 * std::f64::consts::PI) + 0.5 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(wrap(0.25), 0.25);
    }
}
