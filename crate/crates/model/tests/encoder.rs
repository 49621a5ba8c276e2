mod common;

use common::*;
use trajplan_core::Scenario;
use trajplan_diffmath::gradcheck::check_params;
use trajplan_diffmath::{seeded_rng, Session, Tensor, Var};
use trajplan_model::{EncoderVariant, Model, ModelError, QueryMode, VISUAL_PROJ_PREFIX};

fn encode(m: &Model, data: &[&Scenario]) -> Tensor {
    let b = m.batch(data).unwrap();
    let mut s = Session::inference(&m.params);
    let st = s.input(b.states.clone());
    let vi = s.input(b.visual.clone());
    let ctx = m.encoder.encode(&mut s, st, vi).unwrap();
    s.graph.value(ctx.tokens).clone()
}

fn rows(t: &Tensor, i: usize) -> &[f64] {
    let per = t.numel() / t.shape()[0];
    &t.data()[i * per..(i + 1) * per]
}

#[test]
fn token_counts() {
    let data = scenarios(3, 1);
    let refs: Vec<&Scenario> = data.iter().collect();
    let m = model(EncoderVariant::Concat, QueryMode::IntentOnly, 3, &data);
    assert_eq!(encode(&m, &refs).shape(), [3, 17, 16]);
    let m = model(EncoderVariant::VisionFusion, QueryMode::IntentOnly, 3, &data);
    assert_eq!(encode(&m, &refs).shape(), [3, 16, 16]);
}

#[test]
fn identical_rows_and_batch_equivariance() {
    let data = scenarios(4, 2);
    for variant in [EncoderVariant::Concat, EncoderVariant::VisionFusion] {
        let m = model(variant, QueryMode::IntentOnly, 3, &data);
        let a = encode(&m, &[&data[0], &data[1], &data[0], &data[2]]);
        assert_eq!(rows(&a, 0), rows(&a, 2));
        let b = encode(&m, &[&data[2], &data[0], &data[1], &data[0]]);
        assert_eq!(rows(&a, 0), rows(&b, 1));
        assert_eq!(rows(&a, 1), rows(&b, 2));
        assert_eq!(rows(&a, 3), rows(&b, 0));
    }
}

#[test]
fn zeroed_blocks_reduce_to_embedding() {
    let data = scenarios(2, 3);
    let mut m = model(EncoderVariant::Concat, QueryMode::IntentOnly, 3, &data);
    for p in m.encoder.block_param_prefixes() {
        assert!(m.params.zero_prefix(&p) > 0);
    }
    let refs: Vec<&Scenario> = data.iter().collect();
    let b = m.batch(&refs).unwrap();
    let mut s = Session::inference(&m.params);
    let st = s.input(b.states.clone());
    let out = m.encoder.embed_states(&mut s, st).unwrap();
    // embedded input computed by hand: states · W + bias + pos
    let w = m.params.get("enc.state.weight").unwrap();
    let bias = m.params.get("enc.state.bias").unwrap();
    let pos = m.params.get("enc.pos").unwrap();
    let mut g = Session::inference(&m.params);
    let x = g.input(b.states.clone());
    let (w, bias, pos) = (g.input(w.clone()), g.input(bias.clone()), g.input(pos.clone()));
    let e = g.graph.linear(x, w, bias).unwrap();
    let e = g.graph.add(e, pos).unwrap();
    assert_eq!(s.graph.value(out), g.graph.value(e));
}

#[test]
fn concat_visual_only_touches_last_token() {
    let data = scenarios(2, 4);
    let m = model(EncoderVariant::Concat, QueryMode::IntentOnly, 3, &data);
    let mut other = data[0].clone();
    other.visual.embedding.iter_mut().for_each(|x| *x = -3.0 * *x + 1.0);
    let a = encode(&m, &[&data[0]]);
    let b = encode(&m, &[&other]);
    assert_eq!(a.data()[..16 * 16], b.data()[..16 * 16]);
    assert_ne!(a.data()[16 * 16..], b.data()[16 * 16..]);
    let mut blank = data[0].clone();
    blank.visual = blank.visual.blank();
    let c = encode(&m, &[&blank]);
    assert!(c.data()[16 * 16..].iter().all(|&x| x == 0.0));
}

/// `x + o(v(visual))` with every state token receiving the same vector.
#[test]
fn fusion_with_single_visual_token() {
    let data = scenarios(2, 5);
    let m = model(EncoderVariant::VisionFusion, QueryMode::IntentOnly, 3, &data);
    let refs: Vec<&Scenario> = data.iter().collect();
    let b = m.batch(&refs).unwrap();
    let mut s = Session::inference(&m.params);
    let st = s.input(b.states.clone());
    let x = m.encoder.embed_states(&mut s, st).unwrap();
    let vis = s.input(b.visual.clone());
    let p = |s: &mut Session, n: &str| s.param(n).unwrap();
    let (wv, bv, wo, bo) = (p(&mut s, "enc.fusion.v.weight"), p(&mut s, "enc.fusion.v.bias"), p(&mut s, "enc.fusion.o.weight"), p(&mut s, "enc.fusion.o.bias"));
    let v = s.graph.linear(vis, wv, bv).unwrap();
    let f = s.graph.linear(v, wo, bo).unwrap();
    let x_val = s.graph.value(x).clone();
    let f_val = s.graph.value(f).clone();
    let out = encode(&m, &refs);
    for bi in 0..2 {
        for t in 0..16 {
            for c in 0..16 {
                let want = x_val.get(&[bi, t, c]).unwrap() + f_val.get(&[bi, 0, c]).unwrap();
                let got = out.get(&[bi, t, c]).unwrap();
                assert!((want - got).abs() < 1e-12, "{want} {got}");
            }
        }
    }
    // blank visual, zero value bias: the state tokens pass through unchanged
    let mut blank = data[0].clone();
    blank.visual = blank.visual.blank();
    let out = encode(&m, &[&blank]);
    let bb = m.batch(&[&blank]).unwrap();
    let mut s = Session::inference(&m.params);
    let st = s.input(bb.states.clone());
    let x = m.encoder.embed_states(&mut s, st).unwrap();
    assert_eq!(&out, s.graph.value(x));
}

#[test]
fn fusion_gradients_match_finite_differences() {
    let data = scenarios(3, 6);
    let m = model(EncoderVariant::VisionFusion, QueryMode::IntentOnly, 3, &data);
    let refs: Vec<&Scenario> = data.iter().collect();
    let b = m.batch(&refs).unwrap();
    let names: Vec<String> = m.params.names().filter(|n| n.starts_with("enc.fusion.")).cloned().collect();
    assert_eq!(names.len(), 8);
    let weights = Tensor::from_fn([3, 16, 16], |i| ((i * 7919) % 13) as f64 / 13.0 - 0.5);
    let mut rng = seeded_rng(0, 0);
    let report = check_params(
        &m.params,
        &names,
        |s: &mut Session| -> Result<Var, ModelError> {
            let st = s.input(b.states.clone());
            let vi = s.input(b.visual.clone());
            let ctx = m.encoder.encode(s, st, vi)?;
            let w = s.input(weights.clone());
            let y = s.graph.mul(ctx.tokens, w)?;
            Ok(s.graph.sum(y))
        },
        1e-6,
        Some(10),
        &mut rng,
    )
    .unwrap();
    assert!(report.samples.len() >= 10 * 8 - 20);
    assert!(report.max_rel_err() <= 1e-4, "{:?}", report.worst());
}

#[test]
fn wrong_visual_dim_is_rejected() {
    let data = scenarios(1, 7);
    let m = model(EncoderVariant::Concat, QueryMode::IntentOnly, 3, &data);
    let b = m.batch(&[&data[0]]).unwrap();
    let mut s = Session::inference(&m.params);
    let st = s.input(b.states.clone());
    let vi = s.input(Tensor::zeros([1, 1, D_VIS + 1]));
    assert!(matches!(m.encoder.encode(&mut s, st, vi), Err(ModelError::Shape(_))));
    assert!(m.params.names().any(|n| n.starts_with(VISUAL_PROJ_PREFIX)));
}

#[test]
fn outputs_finite_at_any_seed() {
    let data = scenarios(4, 8);
    let refs: Vec<&Scenario> = data.iter().collect();
    for seed in 0..5 {
        for variant in [EncoderVariant::Concat, EncoderVariant::VisionFusion] {
            let mut m = Model::new(config(variant, QueryMode::IntentOnly, 3), seed).unwrap();
            m.norm = trajplan_model::Normalizer::fit(&data);
            assert!(encode(&m, &refs).is_finite());
        }
    }
}
