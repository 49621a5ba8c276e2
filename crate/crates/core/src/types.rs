use crate::{CoreError, HISTORY_STEPS, HORIZON, STATE_DIM};

/// One past kinematic state of the ego vehicle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EgoState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
}

impl EgoState {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [self.x, self.y, self.vx, self.vy, self.ax, self.ay]
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        Self { x: a[0], y: a[1], vx: a[2], vy: a[3], ax: a[4], ay: a[5] }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// The last 4 s of ego states, oldest first. The final step is the ego pose
/// at prediction time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EgoStateSequence {
    pub steps: Vec<EgoState>,
}

impl EgoStateSequence {
    pub fn new(steps: Vec<EgoState>) -> Result<Self, CoreError> {
        let seq = Self { steps };
        let violations = seq.violations();
        if violations.is_empty() {
            Ok(seq)
        } else {
            Err(CoreError::Invalid { what: "state history", violations })
        }
    }

    pub fn zeros() -> Self {
        Self { steps: vec![EgoState::default(); HISTORY_STEPS] }
    }

    pub fn last(&self) -> Option<&EgoState> {
        self.steps.last()
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps.len() != HISTORY_STEPS {
            out.push(format!("history length {} != {HISTORY_STEPS}", self.steps.len()));
        }
        if let Some(i) = self.steps.iter().position(|s| !s.is_finite()) {
            out.push(format!("history step {i} has a non-finite component"));
        }
        out
    }
}

/// A 5 s plan as 20 BEV waypoints, spaced [`crate::DT`] apart.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<[f64; 2]>) -> Result<Self, CoreError> {
        let t = Self { waypoints };
        let violations = t.violations("trajectory");
        if violations.is_empty() {
            Ok(t)
        } else {
            Err(CoreError::Invalid { what: "trajectory", violations })
        }
    }

    pub fn zeros() -> Self {
        Self { waypoints: vec![[0.0, 0.0]; HORIZON] }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Returns a copy with every waypoint shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self { waypoints: self.waypoints.iter().map(|p| [p[0] + dx, p[1] + dy]).collect() }
    }

    fn violations(&self, label: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.waypoints.len() != HORIZON {
            out.push(format!("{label} length {} != {HORIZON}", self.waypoints.len()));
        }
        if let Some(i) =
            self.waypoints.iter().position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            out.push(format!("{label} waypoint {i} is not finite"));
        }
        out
    }
}

/// Routing command. The discriminants are the integer codes used on disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Intent {
    Straight = 1,
    Left = 2,
    Right = 3,
}

impl Intent {
    pub const ALL: [Intent; 3] = [Intent::Straight, Intent::Left, Intent::Right];

    pub fn code(self) -> i64 {
        self as i64
    }

    /// Position of the intent in a one-hot encoding.
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl TryFrom<i64> for Intent {
    type Error = CoreError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Intent::Straight),
            2 => Ok(Intent::Left),
            3 => Ok(Intent::Right),
            other => Err(CoreError::BadIntent(other)),
        }
    }
}

/// Camera-derived feature vectors. The embedding stands in for a pooled
/// vision-transformer token; the auxiliary vectors stand in for a
/// language-image embedding (`aux_a`) and a self-supervised embedding (`aux_b`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VisualFeature {
    pub embedding: Vec<f64>,
    pub aux_a: Option<Vec<f64>>,
    pub aux_b: Option<Vec<f64>>,
}

impl VisualFeature {
    pub fn new(embedding: Vec<f64>) -> Self {
        Self { embedding, aux_a: None, aux_b: None }
    }

    /// All-zeros feature of the same shape.
    pub fn blank(&self) -> Self {
        let zero = |v: &Vec<f64>| vec![0.0; v.len()];
        Self {
            embedding: zero(&self.embedding),
            aux_a: self.aux_a.as_ref().map(zero),
            aux_b: self.aux_b.as_ref().map(zero),
        }
    }

    pub fn dim(&self) -> usize {
        self.embedding.len()
    }

    fn is_finite(&self) -> bool {
        let fin = |v: &[f64]| v.iter().all(|x| x.is_finite());
        fin(&self.embedding)
            && self.aux_a.as_deref().map_or(true, fin)
            && self.aux_b.as_deref().map_or(true, fin)
    }
}

/// A scored reference plan.
#[derive(Clone, Debug, PartialEq)]
pub struct RaterTrajectory {
    pub trajectory: Trajectory,
    /// 0 (worst) to 10 (best).
    pub score: f64,
    /// Speed at the start of the plan, m/s. Scales the trust region.
    pub initial_speed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub history: EgoStateSequence,
    pub intent: Intent,
    pub visual: VisualFeature,
    pub driven_future: Trajectory,
    pub raters: Vec<RaterTrajectory>,
    pub category: String,
}

impl Scenario {
    /// Builds a scenario, rejecting it if any invariant is violated.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        history: EgoStateSequence,
        intent: Intent,
        visual: VisualFeature,
        driven_future: Trajectory,
        raters: Vec<RaterTrajectory>,
        category: impl Into<String>,
    ) -> Result<Self, CoreError> {
        let s = Self {
            id: id.into(),
            history,
            intent,
            visual,
            driven_future,
            raters,
            category: category.into(),
        };
        let violations = validate_scenario(&s);
        if violations.is_empty() {
            Ok(s)
        } else {
            Err(CoreError::Invalid { what: "scenario", violations })
        }
    }

    /// Highest rater score, or `None` if there are no raters.
    pub fn best_rater_score(&self) -> Option<f64> {
        self.raters.iter().map(|r| r.score).reduce(f64::max)
    }
}

/// Lists every violated scenario invariant; empty iff the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<String> {
    let mut out = s.history.violations();
    out.extend(s.driven_future.violations("future"));
    if !s.visual.is_finite() {
        out.push("visual feature has a non-finite component".to_string());
    }
    if s.visual.embedding.is_empty() {
        out.push("visual embedding is empty".to_string());
    }
    if s.raters.is_empty() || s.raters.len() > 3 {
        out.push(format!("rater count {} not in 1..=3", s.raters.len()));
    }
    for (i, r) in s.raters.iter().enumerate() {
        out.extend(r.trajectory.violations(&format!("rater {i}")));
        if !(0.0..=10.0).contains(&r.score) {
            out.push(format!("rater {i} score {} outside [0, 10]", r.score));
        }
        if !(r.initial_speed >= 0.0) || !r.initial_speed.is_finite() {
            out.push(format!("rater {i} initial_speed {} is not a finite value >= 0", r.initial_speed));
        }
    }
    if !s.raters.iter().any(|r| r.score > 6.0) {
        out.push("no rater score > 6".to_string());
    }
    out
}

/// K candidate trajectories with a probability for each.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    pub modes: Vec<Trajectory>,
    pub probs: Vec<f64>,
}

impl PredictionSet {
    pub const PROB_SUM_TOL: f64 = 1e-6;

    pub fn new(modes: Vec<Trajectory>, probs: Vec<f64>) -> Result<Self, CoreError> {
        let mut violations = Vec::new();
        if modes.is_empty() {
            violations.push("no modes".to_string());
        }
        if modes.len() != probs.len() {
            violations.push(format!("{} modes but {} probabilities", modes.len(), probs.len()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            violations.push("probabilities must be finite and >= 0".to_string());
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::PROB_SUM_TOL {
            violations.push(format!("probabilities sum to {total}, not 1"));
        }
        for (k, m) in modes.iter().enumerate() {
            violations.extend(m.violations(&format!("mode {k}")));
        }
        if violations.is_empty() {
            Ok(Self { modes, probs })
        } else {
            Err(CoreError::Invalid { what: "prediction set", violations })
        }
    }

    /// A single certain mode.
    pub fn single(t: Trajectory) -> Self {
        Self { modes: vec![t], probs: vec![1.0] }
    }

    pub fn k(&self) -> usize {
        self.modes.len()
    }

    /// Mode indices by descending probability, ties broken by lower index.
    pub fn ranked_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx
    }

    /// The most probable mode.
    pub fn top1(&self) -> &Trajectory {
        &self.modes[self.ranked_indices()[0]]
    }
}
