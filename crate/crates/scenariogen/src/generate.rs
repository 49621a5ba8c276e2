use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use trajplan_core::record::ScenarioRecord;
use trajplan_core::{validate_scenario, CoreError, Intent, RaterTrajectory, Scenario, Trajectory, VisualFeature};

use crate::frame::{to_relative_frame, RigidTransform};
use crate::kinematics::{
    intent_from_heading_change, net_heading_change, rollout, states_from_positions, Maneuver, Start, NOW, TOTAL,
};
use crate::GenError;

/// Scenario family. Serialized in snake_case, e.g. `debris_swerve`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    StraightCruise,
    LeftTurn,
    RightTurn,
    Stop,
    CutIn,
    DebrisSwerve,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::StraightCruise,
        Category::LeftTurn,
        Category::RightTurn,
        Category::Stop,
        Category::CutIn,
        Category::DebrisSwerve,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::StraightCruise => "straight_cruise",
            Category::LeftTurn => "left_turn",
            Category::RightTurn => "right_turn",
            Category::Stop => "stop",
            Category::CutIn => "cut_in",
            Category::DebrisSwerve => "debris_swerve",
        }
    }

    pub fn index(self) -> usize {
        Category::ALL.iter().position(|&c| c == self).unwrap()
    }

    fn nominal_intent(self) -> Intent {
        match self {
            Category::LeftTurn => Intent::Left,
            Category::RightTurn => Intent::Right,
            _ => Intent::Straight,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Category::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// What the futures depend on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    /// Category drawn from `category_mix`; maneuvers may begin up to 1 s
    /// before prediction time, so history, intent and visuals all carry
    /// signal.
    #[default]
    Standard,
    /// Identical-looking cruise histories that branch after prediction time:
    /// straight intent continues (70%) or brakes to a stop (30%); turn
    /// intents take a tight (70%) or a wide (30%) turn. Visuals are pure
    /// noise, so the branch is not predictable from the inputs.
    Multimodal,
    /// Cruise histories, straight intent, and a category (cruise, stop,
    /// cut-in, swerve) that only the visual feature reveals.
    VisualNecessary,
}

/// Generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n: usize,
    pub seed: u64,
    /// Relative category weights. Missing categories have weight 0.
    pub category_mix: BTreeMap<Category, f64>,
    /// Std of position noise on history waypoints, meters.
    pub noise_pos: f64,
    /// Std of per-step speed jitter over the history, m/s.
    pub noise_vel: f64,
    /// Speed at the start of the history is uniform in this range, m/s.
    pub speed_range: (f64, f64),
    pub mode: GenMode,
    pub d_vis: usize,
    /// Std of the noise added to visual signatures.
    pub visual_noise: f64,
    /// Dimensions of the two auxiliary embeddings, if emitted.
    pub aux_dims: Option<(usize, usize)>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            seed: 0,
            category_mix: Category::ALL.into_iter().map(|c| (c, 1.0)).collect(),
            noise_pos: 0.05,
            noise_vel: 0.05,
            speed_range: (5.0, 15.0),
            mode: GenMode::Standard,
            d_vis: trajplan_core::DEFAULT_AUX_B_DIM,
            visual_noise: 0.5,
            aux_dims: None,
        }
    }
}

const VISUAL_NECESSARY: [Category; 4] =
    [Category::StraightCruise, Category::Stop, Category::CutIn, Category::DebrisSwerve];

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let mut v = Vec::new();
        let weights = self.weights();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            v.push("category weights must be finite and >= 0".to_string());
        } else if weights.iter().sum::<f64>() <= 0.0 {
            v.push("category weights must not all be zero".to_string());
        } else if self.mode == GenMode::VisualNecessary
            && VISUAL_NECESSARY.iter().all(|c| weights[c.index()] == 0.0)
        {
            v.push("visual_necessary mode needs weight on straight_cruise, stop, cut_in or debris_swerve".into());
        }
        for (name, x) in [("noise_pos", self.noise_pos), ("noise_vel", self.noise_vel), ("visual_noise", self.visual_noise)] {
            if !(x.is_finite() && x >= 0.0) {
                v.push(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        let (lo, hi) = self.speed_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            v.push(format!("speed_range must satisfy 0 < min <= max, got ({lo}, {hi})"));
        }
        if self.d_vis == 0 {
            v.push("d_vis must be >= 1".into());
        }
        if matches!(self.aux_dims, Some((0, _)) | Some((_, 0))) {
            v.push("aux dimensions must be >= 1".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(GenError::Config(v))
        }
    }

    fn weights(&self) -> Vec<f64> {
        Category::ALL.iter().map(|c| self.category_mix.get(c).copied().unwrap_or(0.0)).collect()
    }
}

/// Fixed per-category signature vectors. Seeded by a constant so the same
/// category looks the same across generator seeds.
struct Signatures {
    visual: Vec<Vec<f64>>,
    aux: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

const SIGNATURE_SEED: u64 = 0x7369_676e_6174_7572;

fn signature_table(stream: u64, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SIGNATURE_SEED);
    rng.set_stream(stream);
    Category::ALL.iter().map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

impl Signatures {
    fn new(cfg: &GenConfig) -> Self {
        Self {
            visual: signature_table(0, cfg.d_vis),
            aux: cfg.aux_dims.map(|(a, b)| (signature_table(1, a), signature_table(2, b))),
        }
    }
}

fn noisy(rng: &mut ChaCha8Rng, base: Option<&[f64]>, dim: usize, std: f64) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let n: f64 = rng.sample(StandardNormal);
            base.map_or(0.0, |b| b[i]) + std * n
        })
        .collect()
}

/// Generates `cfg.n` scenarios. Scenario `i` depends only on `cfg` and `i`.
pub fn generate(cfg: &GenConfig) -> Result<Vec<Scenario>, GenError> {
    cfg.validate()?;
    let sig = Signatures::new(cfg);
    (0..cfg.n).map(|i| build(cfg, &sig, i)).collect()
}

/// Scenario `index` of the set [`generate`] would produce for `cfg`.
pub fn generate_one(cfg: &GenConfig, index: usize) -> Result<Scenario, GenError> {
    cfg.validate()?;
    build(cfg, &Signatures::new(cfg), index)
}

fn deg(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi).to_radians()
}

fn side(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn turn(rng: &mut ChaCha8Rng, sign: f64) -> Maneuver {
    Maneuver::Turn { yaw: sign * deg(rng, 45.0, 90.0), steps: rng.gen_range(12..=20) }
}

/// Driven maneuver of a category and its onset offset from prediction time.
fn standard_maneuver(rng: &mut ChaCha8Rng, c: Category) -> (Maneuver, isize) {
    match c {
        Category::StraightCruise => (Maneuver::Cruise, 0),
        Category::LeftTurn => (turn(rng, 1.0), rng.gen_range(-4..=4)),
        Category::RightTurn => (turn(rng, -1.0), rng.gen_range(-4..=4)),
        Category::Stop => (Maneuver::Stop { decel: rng.gen_range(2.5..4.5) }, rng.gen_range(-2..=4)),
        Category::CutIn => {
            let m = Maneuver::Brake { decel: rng.gen_range(3.0..5.0), steps: rng.gen_range(4..=8) };
            (m, rng.gen_range(-2..=4))
        }
        // starts after prediction time so the reference heading is unaffected
        Category::DebrisSwerve => {
            let m = Maneuver::Shift { peak_yaw: side(rng) * deg(rng, 8.0, 12.0), steps: rng.gen_range(4..=6) };
            (m, rng.gen_range(1..=4))
        }
    }
}

fn wrong_maneuver(rng: &mut ChaCha8Rng, intent: Intent) -> Maneuver {
    match intent {
        Intent::Straight => {
            let s = side(rng);
            turn(rng, s)
        }
        Intent::Left | Intent::Right => {
            let other = if intent == Intent::Left { -1.0 } else { 1.0 };
            if rng.gen_bool(0.5) {
                Maneuver::Cruise
            } else {
                turn(rng, other)
            }
        }
    }
}

/// Category, driven maneuver, onset offset and whether visuals carry the
/// category signature.
fn plan(cfg: &GenConfig, rng: &mut ChaCha8Rng, mix: &WeightedIndex<f64>) -> (Category, Maneuver, isize, bool) {
    match cfg.mode {
        GenMode::Standard => {
            let c = Category::ALL[mix.sample(rng)];
            let (m, off) = standard_maneuver(rng, c);
            (c, m, off, true)
        }
        GenMode::Multimodal => {
            let branch = rng.gen_range(0..3);
            let major = rng.gen_bool(0.7);
            let (c, m) = match (branch, major) {
                (0, true) => (Category::StraightCruise, Maneuver::Cruise),
                (0, false) => (Category::Stop, Maneuver::Stop { decel: rng.gen_range(2.5..4.0) }),
                (b, major) => {
                    let (c, sign) = if b == 1 { (Category::LeftTurn, 1.0) } else { (Category::RightTurn, -1.0) };
                    let m = if major {
                        Maneuver::Turn { yaw: sign * deg(rng, 80.0, 90.0), steps: rng.gen_range(10..=12) }
                    } else {
                        Maneuver::Turn { yaw: sign * deg(rng, 30.0, 40.0), steps: rng.gen_range(14..=16) }
                    };
                    (c, m)
                }
            };
            (c, m, 1, false)
        }
        GenMode::VisualNecessary => {
            let c = Category::ALL[mix.sample(rng)];
            let m = match standard_maneuver(rng, c).0 {
                // one swerve side, so the visual pins down the whole future
                Maneuver::Shift { peak_yaw, steps } => Maneuver::Shift { peak_yaw: peak_yaw.abs(), steps },
                m => m,
            };
            (c, m, 1, true)
        }
    }
}

fn scenario_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Shifts each waypoint sideways by `m * (j + 1) / len` along the local
/// left normal of the path starting at the origin.
fn lateral_perturbation(t: &Trajectory, m: f64) -> Trajectory {
    let mut pts = vec![[0.0, 0.0]];
    pts.extend_from_slice(&t.waypoints);
    let n = t.len();
    let waypoints = (1..pts.len())
        .map(|i| {
            let (a, b) = (pts[i - 1], pts[(i + 1).min(pts.len() - 1)]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            let (hx, hy) = if len > 1e-9 { (dx / len, dy / len) } else { (1.0, 0.0) };
            let d = m * i as f64 / n as f64;
            [pts[i][0] - d * hy, pts[i][1] + d * hx]
        })
        .collect();
    Trajectory { waypoints }
}

fn build(cfg: &GenConfig, sig: &Signatures, index: usize) -> Result<Scenario, GenError> {
    let mut rng = scenario_rng(cfg.seed, index);
    let mix_weights = match cfg.mode {
        GenMode::VisualNecessary => {
            let w = cfg.weights();
            Category::ALL.iter().map(|c| if VISUAL_NECESSARY.contains(c) { w[c.index()] } else { 0.0 }).collect()
        }
        _ => cfg.weights(),
    };
    let mix = WeightedIndex::new(mix_weights).expect("weights checked by validate");
    let (category, driven, offset, informative) = plan(cfg, &mut rng, &mix);
    let onset = (NOW as isize + offset) as usize;

    let (lo, hi) = cfg.speed_range;
    let speed = if lo < hi { rng.gen_range(lo..hi) } else { lo };
    let jitter = Normal::new(0.0, cfg.noise_vel).expect("validated");
    // speed jitter only reaches positions up to prediction time
    let speed_noise = (0..TOTAL - 1).map(|k| if k + 2 <= NOW { jitter.sample(&mut rng) } else { 0.0 }).collect();
    let start = Start {
        pos: [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)],
        yaw: rng.gen_range(-PI..PI),
        speed,
        speed_noise,
    };
    let mut world = rollout(&start, &[(onset, driven)]);
    let pos_noise = Normal::new(0.0, cfg.noise_pos).expect("validated");
    for p in world.iter_mut().take(NOW + 1) {
        p[0] += pos_noise.sample(&mut rng);
        p[1] += pos_noise.sample(&mut rng);
    }

    let wrong = wrong_maneuver(&mut rng, category.nominal_intent());
    let program = if onset <= NOW { vec![(onset, driven), (NOW + 1, wrong)] } else { vec![(onset, wrong)] };
    let wrong_world = rollout(&start, &program);

    let frame = RigidTransform::ego_frame(&states_from_positions(&world, NOW));
    let rel: Vec<[f64; 2]> = world.iter().map(|&p| frame.point(p)).collect();
    let history = states_from_positions(&rel, NOW);
    let future = Trajectory { waypoints: rel[NOW + 1..].to_vec() };
    let wrong_future = Trajectory { waypoints: wrong_world[NOW + 1..].iter().map(|&p| frame.point(p)).collect() };
    let intent = intent_from_heading_change(net_heading_change(&history, &future));

    let ego_speed = history.last().map_or(0.0, |s| s.speed());
    let m = rng.gen_range(0.2..1.5);
    let perturbed = lateral_perturbation(&future, side(&mut rng) * m);
    let raters = vec![
        RaterTrajectory { trajectory: future.clone(), score: 10.0, initial_speed: ego_speed },
        RaterTrajectory { trajectory: perturbed, score: 9.0 - 3.0 * (m - 0.2) / 1.3, initial_speed: ego_speed },
        RaterTrajectory { trajectory: wrong_future, score: rng.gen_range(0.0..=5.0), initial_speed: ego_speed },
    ];

    let c = category.index();
    let base = |t: &Vec<Vec<f64>>| informative.then(|| t[c].clone());
    let mut visual = VisualFeature::new(noisy(&mut rng, base(&sig.visual).as_deref(), cfg.d_vis, cfg.visual_noise));
    if let Some((a, b)) = &sig.aux {
        visual.aux_a = Some(noisy(&mut rng, base(a).as_deref(), a[c].len(), cfg.visual_noise));
        visual.aux_b = Some(noisy(&mut rng, base(b).as_deref(), b[c].len(), cfg.visual_noise));
    }

    Scenario::new(format!("{}-{index:06}", cfg.seed), history, intent, visual, future, raters, category.as_str())
        .map_err(|source| GenError::Record { index, source })
}

/// Accepts externally extracted records in the scenario record schema,
/// validating each and optionally moving it into the ego frame.
pub fn import_records(
    records: impl IntoIterator<Item = ScenarioRecord>,
    relative: bool,
) -> Result<Vec<Scenario>, GenError> {
    records
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            let id = r.id.clone();
            let s = r.into_scenario_unchecked().map_err(|source| GenError::Record { index, source })?;
            let s = if relative { to_relative_frame(&s) } else { s };
            let violations = validate_scenario(&s);
            if violations.is_empty() {
                Ok(s)
            } else {
                Err(GenError::Record { index, source: CoreError::InvalidRecord { line: index + 1, id, violations } })
            }
        })
        .collect()
}
