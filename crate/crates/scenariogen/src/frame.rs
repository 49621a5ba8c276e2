use trajplan_core::{EgoState, EgoStateSequence, RaterTrajectory, Scenario, Trajectory};

/// Below this speed (m/s) a velocity does not define a heading.
pub const MIN_HEADING_SPEED: f64 = 1e-6;

/// Maps world coordinates into an ego frame: translate by `-origin`, then
/// rotate by the negated ego heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub origin: [f64; 2],
    pub cos: f64,
    pub sin: f64,
}

impl RigidTransform {
    pub const IDENTITY: Self = Self { origin: [0.0, 0.0], cos: 1.0, sin: 0.0 };

    /// Frame centered on the last history position with +x along the last
    /// velocity. A velocity too small to define a heading falls back to the
    /// most recent earlier one that does, then to the current axes.
    pub fn ego_frame(history: &EgoStateSequence) -> Self {
        let Some(last) = history.last() else { return Self::IDENTITY };
        let (cos, sin) = history
            .steps
            .iter()
            .rev()
            .find(|s| s.speed() > MIN_HEADING_SPEED && s.speed().is_finite())
            .map(|s| (s.vx / s.speed(), s.vy / s.speed()))
            .unwrap_or((1.0, 0.0));
        Self { origin: [last.x, last.y], cos, sin }
    }

    pub fn point(&self, p: [f64; 2]) -> [f64; 2] {
        let (x, y) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        [self.cos * x + self.sin * y, self.cos * y - self.sin * x]
    }

    /// Rotation only, for velocities and accelerations.
    pub fn vector(&self, v: [f64; 2]) -> [f64; 2] {
        [self.cos * v[0] + self.sin * v[1], self.cos * v[1] - self.sin * v[0]]
    }

    pub fn trajectory(&self, t: &Trajectory) -> Trajectory {
        Trajectory { waypoints: t.waypoints.iter().map(|&p| self.point(p)).collect() }
    }

    pub fn state(&self, s: &EgoState) -> EgoState {
        let [x, y] = self.point([s.x, s.y]);
        let [vx, vy] = self.vector([s.vx, s.vy]);
        let [ax, ay] = self.vector([s.ax, s.ay]);
        EgoState { x, y, vx, vy, ax, ay }
    }
}

/// Re-expresses every trajectory of `s` in the ego frame at prediction time:
/// the last history position becomes the origin and the ego heading +x.
pub fn to_relative_frame(s: &Scenario) -> Scenario {
    let f = RigidTransform::ego_frame(&s.history);
    Scenario {
        id: s.id.clone(),
        history: EgoStateSequence { steps: s.history.steps.iter().map(|st| f.state(st)).collect() },
        intent: s.intent,
        visual: s.visual.clone(),
        driven_future: f.trajectory(&s.driven_future),
        raters: s
            .raters
            .iter()
            .map(|r| RaterTrajectory { trajectory: f.trajectory(&r.trajectory), ..r.clone() })
            .collect(),
        category: s.category.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use trajplan_core::{Intent, VisualFeature, HISTORY_STEPS, HORIZON};

    fn scenario(states: Vec<EgoState>, future: Trajectory) -> Scenario {
        Scenario {
            id: "s".into(),
            history: EgoStateSequence { steps: states },
            intent: Intent::Straight,
            visual: VisualFeature::new(vec![1.0]),
            raters: vec![RaterTrajectory { trajectory: future.clone(), score: 10.0, initial_speed: 5.0 }],
            driven_future: future,
            category: "straight_cruise".into(),
        }
    }

    fn cruise(x0: f64, y0: f64, vx: f64, vy: f64) -> Scenario {
        let states = (0..HISTORY_STEPS)
            .map(|i| {
                let k = i as f64 - 15.0;
                EgoState { x: x0 + vx * 0.25 * k, y: y0 + vy * 0.25 * k, vx, vy, ax: 0.0, ay: 0.0 }
            })
            .collect();
        let future = (1..=HORIZON).map(|j| [x0 + vx * 0.25 * j as f64, y0 + vy * 0.25 * j as f64]).collect();
        scenario(states, Trajectory { waypoints: future })
    }

    #[test]
    fn relative_input_is_unchanged() {
        let s = cruise(0.0, 0.0, 5.0, 0.0);
        assert_eq!(to_relative_frame(&s), s);
    }

    #[test]
    fn translation_only() {
        let s = to_relative_frame(&cruise(12.0, -7.0, 5.0, 0.0));
        assert_eq!(s.history.last().unwrap().x, 0.0);
        assert_eq!(s.driven_future.waypoints[0], [1.25, 0.0]);
    }

    #[test]
    fn rotation_aligns_heading() {
        let s = to_relative_frame(&cruise(3.0, 4.0, 3.0, 4.0));
        let last = s.history.last().unwrap();
        assert!((last.vx - 5.0).abs() < 1e-12 && last.vy.abs() < 1e-12);
        let w = s.driven_future.waypoints[19];
        assert!((w[0] - 25.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    }

    #[test]
    fn stationary_keeps_prior_heading() {
        let mut s = cruise(0.0, 0.0, 0.0, 2.0);
        s.history.steps[15].vx = 0.0;
        s.history.steps[15].vy = 0.0;
        let f = RigidTransform::ego_frame(&s.history);
        assert_eq!((f.cos, f.sin), (0.0, 1.0));
        let all_still = cruise(1.0, 1.0, 0.0, 0.0);
        assert_eq!(RigidTransform::ego_frame(&all_still.history), RigidTransform { origin: [1.0, 1.0], ..RigidTransform::IDENTITY });
    }
}
