mod common;

use common::{model_config, scenarios};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajplan_core::{PredictionSet, Scenario, Trajectory, HORIZON};
use trajplan_diffmath::gradcheck::check_params;
use trajplan_diffmath::{seeded_rng, Graph, Session, Tensor, Var};
use trajplan_model::{EncoderVariant, Model, Normalizer, QueryMode};
use trajplan_training::{closest_mode, wta_loss, wta_loss_graph, TrainError};

fn random_traj(rng: &mut impl Rng, spread: f64) -> Trajectory {
    Trajectory { waypoints: (0..HORIZON).map(|_| [rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)]).collect() }
}

fn random_set(rng: &mut impl Rng, k: usize) -> PredictionSet {
    let modes = (0..k).map(|_| random_traj(rng, 5.0)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let z: f64 = w.iter().sum();
    PredictionSet::new(modes, w.iter().map(|x| x / z).collect()).unwrap()
}

#[test]
fn closest_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let p = random_set(&mut rng, 5);
        let target = random_traj(&mut rng, 5.0);
        let mut dists = Vec::new();
        for m in &p.modes {
            let mut d = 0.0;
            for t in 0..HORIZON {
                let dx = m.waypoints[t][0] - target.waypoints[t][0];
                let dy = m.waypoints[t][1] - target.waypoints[t][1];
                d += (dx * dx + dy * dy).sqrt();
            }
            dists.push(d / HORIZON as f64);
        }
        let mut best = 0;
        for k in 1..dists.len() {
            if dists[k] < dists[best] {
                best = k;
            }
        }
        let (loss, c) = wta_loss(&p, &target, 1.0);
        assert_eq!(c, best);
        assert!(loss >= 0.0);
        let flat: Vec<f64> = p.modes.iter().flat_map(|m| m.waypoints.iter().flatten().copied()).collect();
        assert_eq!(closest_mode(&flat, &target), best);
    }
}

fn locality_case(seed: u64, b: usize, k: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traj = Tensor::from_fn([b, k, HORIZON, 2], |_| rng.gen_range(-4.0..4.0));
    let logits = Tensor::from_fn([b, k], |_| rng.gen_range(-2.0..2.0));
    let targets: Vec<Trajectory> = (0..b).map(|_| random_traj(&mut rng, 4.0)).collect();
    let refs: Vec<&Trajectory> = targets.iter().collect();
    let mut g = Graph::new();
    let tv = g.leaf(traj, true);
    let lv = g.leaf(logits, true);
    let (loss, closest) = wta_loss_graph(&mut g, tv, lv, &refs, 1.0).unwrap();
    g.backward(loss).unwrap();
    let grad = g.grad(tv).unwrap().data();
    let stride = HORIZON * 2;
    for i in 0..b {
        for m in 0..k {
            let block = &grad[(i * k + m) * stride..(i * k + m + 1) * stride];
            if m == closest[i] {
                assert!(block.iter().any(|&x| x != 0.0));
            } else {
                assert!(block.iter().all(|&x| x == 0.0), "sample {i} mode {m}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn non_closest_modes_get_exactly_zero_gradient(seed in any::<u64>(), b in 1usize..5, k in 1usize..8) {
        locality_case(seed, b, k);
    }

    #[test]
    fn loss_is_nonnegative(seed in any::<u64>(), k in 1usize..21, lambda in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_set(&mut rng, k);
        let (loss, c) = wta_loss(&p, &random_traj(&mut rng, 5.0), lambda);
        prop_assert!(loss >= 0.0);
        prop_assert!(-p.probs[c].ln() >= 0.0);
    }
}

/// Gradient check of the full encoder → decoder → loss composite.
fn composite_check(variant: EncoderVariant, query_mode: QueryMode) {
    let data: Vec<Scenario> = scenarios(3, 21);
    let refs: Vec<&Scenario> = data.iter().collect();
    let mut m = Model::new(model_config(variant, query_mode, 3), 4).unwrap();
    m.norm = Normalizer::fit(&data);
    let b = m.batch(&refs).unwrap();
    let targets: Vec<&Trajectory> = data.iter().map(|s| &s.driven_future).collect();
    let names: Vec<String> = m.params.names().cloned().collect();
    let report = check_params(
        &m.params,
        &names,
        |s: &mut Session| -> Result<Var, TrainError> {
            let out = m.forward(s, &b)?;
            Ok(wta_loss_graph(&mut s.graph, out.trajectories, out.logits, &targets, 1.0)?.0)
        },
        1e-6,
        Some(10),
        &mut seeded_rng(2, 0),
    )
    .unwrap();
    assert!(report.samples.len() >= 10 * names.len().min(1));
    assert!(report.max_rel_err() <= 1e-4, "{:?}", report.worst());
}

#[test]
fn composite_gradient_concat() {
    composite_check(EncoderVariant::Concat, QueryMode::IntentOnly);
}

#[test]
fn composite_gradient_vision_fusion_fused_query() {
    composite_check(EncoderVariant::VisionFusion, QueryMode::FusedQuery);
}
