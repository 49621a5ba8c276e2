use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use trajplan_diffmath::{ParamStore, Tensor};

use crate::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates per parameter name, plus the step counter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
}

/// One bias-corrected Adam update at learning rate `lr`. Parameters without
/// an entry in `grads` (frozen or unused) are left untouched, moments
/// included.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &BTreeMap<String, Tensor>,
    state: &mut AdamState,
    cfg: &AdamConfig,
    lr: f64,
) -> Result<(), TrainError> {
    for (name, g) in grads {
        let p = params.get(name).ok_or_else(|| TrainError::Shape(format!("gradient for unknown parameter {name}")))?;
        if p.shape() != g.shape() {
            return Err(TrainError::Shape(format!("{name}: parameter {:?}, gradient {:?}", p.shape(), g.shape())));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (name, g) in grads {
        let shape = g.shape().to_vec();
        let m = state.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(shape.clone()));
        let v = state.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(shape));
        let p = params.get_mut(name).expect("checked above");
        for (((pi, mi), vi), gi) in p.data_mut().iter_mut().zip(m.data_mut()).zip(v.data_mut()).zip(g.data()) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut BTreeMap<String, Tensor>, max_norm: f64) -> f64 {
    let norm = grads.values().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.values_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(name: &str, x: f64) -> BTreeMap<String, Tensor> {
        [(name.to_string(), Tensor::scalar(x).reshape([1]).unwrap())].into_iter().collect()
    }

    #[test]
    fn three_step_trace() {
        // hand-run recurrence for p0 = 1, grads 0.5, -1.0, 2.0
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut params = ParamStore::new();
        params.insert("p", Tensor::ones([1]));
        let mut st = AdamState::default();
        let (mut p, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for (t, g) in [0.5, -1.0, 2.0].into_iter().enumerate() {
            adam_step(&mut params, &one("p", g), &mut st, &cfg, cfg.lr).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let k = t as i32 + 1;
            p -= 0.1 * (m / (1.0 - 0.9f64.powi(k))) / ((v / (1.0 - 0.999f64.powi(k))).sqrt() + 1e-8);
            assert!((params.get("p").unwrap().data()[0] - p).abs() < 1e-14);
            if t == 0 {
                // the first bias-corrected step has magnitude lr · |g| / (|g| + eps)
                assert!((1.0 - p - 0.1 * 0.5 / (0.5 + 1e-8)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_gradient_on_fresh_state() {
        let mut params = ParamStore::new();
        params.insert("p", Tensor::full([3], 2.0));
        let mut st = AdamState::default();
        let g: BTreeMap<_, _> = [("p".to_string(), Tensor::zeros([3]))].into_iter().collect();
        adam_step(&mut params, &g, &mut st, &AdamConfig::default(), 1e-3).unwrap();
        assert_eq!(params.get("p").unwrap().data(), [2.0; 3]);
        assert_eq!(st.m["p"].data(), [0.0; 3]);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let cfg = AdamConfig::default();
        let mut params = ParamStore::new();
        params.insert("p", Tensor::ones([1]));
        let mut st = AdamState::default();
        adam_step(&mut params, &one("p", 1.0), &mut st, &cfg, cfg.lr).unwrap();
        let (m1, v1) = (st.m["p"].data()[0], st.v["p"].data()[0]);
        adam_step(&mut params, &one("p", 0.0), &mut st, &cfg, cfg.lr).unwrap();
        assert_eq!(st.m["p"].data()[0], 0.9 * m1);
        assert_eq!(st.v["p"].data()[0], 0.999 * v1);
    }

    #[test]
    fn zero_lr_keeps_params() {
        let mut params = ParamStore::new();
        params.insert("p", Tensor::full([2], 0.3));
        let mut st = AdamState::default();
        for _ in 0..5 {
            let g = [("p".to_string(), Tensor::full([2], 0.7))].into_iter().collect();
            adam_step(&mut params, &g, &mut st, &AdamConfig::default(), 0.0).unwrap();
        }
        assert_eq!(params.get("p").unwrap().data(), [0.3, 0.3]);
    }

    #[test]
    fn shape_mismatch() {
        let mut params = ParamStore::new();
        params.insert("p", Tensor::ones([2]));
        let mut st = AdamState::default();
        assert!(adam_step(&mut params, &one("p", 1.0), &mut st, &AdamConfig::default(), 1e-3).is_err());
        assert_eq!(st.step, 0);
    }

    #[test]
    fn clipping() {
        let mut g: BTreeMap<_, _> = [("a".to_string(), Tensor::new([2], vec![3.0, 4.0]).unwrap())].into_iter().collect();
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g["a"].data()[0] - 0.6).abs() < 1e-15);
    }
}
