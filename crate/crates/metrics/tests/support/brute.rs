//! Stand-alone re-evaluation of the rater feedback score on plain arrays,
//! plus a generator of randomized cases. Shared by the metric oracle tests
//! and the acceptance suite.

#![allow(dead_code)]

use rand::Rng;

pub const STEPS: usize = 20;

pub struct Rater {
    pub path: Vec<[f64; 2]>,
    pub score: f64,
    pub speed: f64,
}

fn scale(v: f64) -> f64 {
    let t = ((v - 1.4) / (11.0 - 1.4)).clamp(0.0, 1.0);
    0.5 * (1.0 - t) + 1.0 * t
}

fn base(seconds: u32) -> (f64, f64, usize) {
    match seconds {
        3 => (1.0, 4.0, 11),
        5 => (1.8, 7.2, 19),
        _ => panic!("unsupported time {seconds}"),
    }
}

fn heading(path: &[[f64; 2]], i: usize) -> f64 {
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(path.len() - 1);
    let (dx, dy) = (path[hi][0] - path[lo][0], path[hi][1] - path[lo][1]);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// Score of `pred` at `seconds` (3 or 5).
pub fn rfs(pred: &[[f64; 2]], raters: &[Rater], seconds: u32) -> f64 {
    let (lat0, long0, i) = base(seconds);
    let mut inside = Vec::new();
    let mut ranked = Vec::new();
    for (j, r) in raters.iter().enumerate() {
        let th = heading(&r.path, i);
        let d = [pred[i][0] - r.path[i][0], pred[i][1] - r.path[i][1]];
        let long = d[0] * th.cos() + d[1] * th.sin();
        let lat = d[1] * th.cos() - d[0] * th.sin();
        let s = scale(r.speed);
        if lat.abs() <= lat0 * s && long.abs() <= long0 * s {
            inside.push(r.score);
        }
        ranked.push(((d[0] * d[0] + d[1] * d[1]).sqrt(), r.score, j));
    }
    if !inside.is_empty() {
        return inside.into_iter().fold(f64::MIN, f64::max);
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    let (delta, score, _) = ranked[0];
    let e = (delta - 0.5).clamp(0.0, 1.0);
    let decayed = score / 10f64.powf(e);
    if decayed < 4.0 {
        4.0
    } else {
        decayed
    }
}

fn random_path<R: Rng>(rng: &mut R) -> Vec<[f64; 2]> {
    let v: f64 = rng.gen_range(0.0..20.0);
    let mut yaw: f64 = rng.gen_range(-3.2..3.2);
    let dyaw: f64 = rng.gen_range(-0.12..0.12);
    let (mut x, mut y) = (0.0, 0.0);
    (0..STEPS)
        .map(|_| {
            x += v * 0.25 * yaw.cos();
            y += v * 0.25 * yaw.sin();
            yaw += dyaw;
            [x, y]
        })
        .collect()
}

fn jitter<R: Rng>(rng: &mut R, path: &[[f64; 2]], spread: f64) -> Vec<[f64; 2]> {
    path.iter()
        .map(|p| [p[0] + rng.gen_range(-spread..spread), p[1] + rng.gen_range(-spread..spread)])
        .collect()
}

fn sideways<R: Rng>(rng: &mut R, pred: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let d = rng.gen_range(0.5..1.2) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    (0..STEPS)
        .map(|i| {
            let th = heading(pred, i);
            [pred[i][0] - d * th.sin(), pred[i][1] + d * th.cos()]
        })
        .collect()
}

fn random_speed<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..6) {
        0 => 1.4,
        1 => 11.0,
        2 => 0.0,
        _ => rng.gen_range(0.0..25.0),
    }
}

/// Plan and 1..=3 raters. Raters are perturbations of the plan of varying
/// size, so cases land inside trust regions, in the decay band and on the
/// floor. Speeds include the scale breakpoints exactly.
pub fn random_case<R: Rng>(rng: &mut R) -> (Vec<[f64; 2]>, Vec<Rater>) {
    let pred = random_path(rng);
    if rng.gen_bool(0.3) {
        // one well-scored rater offset sideways to around the region edge
        let r = Rater { path: sideways(rng, &pred), score: rng.gen_range(6.0..=10.0), speed: random_speed(rng) };
        return (pred, vec![r]);
    }
    let n = rng.gen_range(1..=3);
    let raters = (0..n)
        .map(|_| {
            let path = if rng.gen_bool(0.2) {
                random_path(rng)
            } else {
                let spread = [0.3, 1.0, 3.0, 8.0][rng.gen_range(0..4)];
                jitter(rng, &pred, spread)
            };
            let speed = random_speed(rng);
            let score = if rng.gen_bool(0.1) { rng.gen_range(0..=10) as f64 } else { rng.gen_range(0.0..=10.0) };
            Rater { path, score, speed }
        })
        .collect();
    (pred, raters)
}
