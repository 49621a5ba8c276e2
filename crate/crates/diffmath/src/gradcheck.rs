//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates the forward function, so it is an
//! independent check on the tape's backward rules.

use rand::seq::index::sample;
use rand::Rng;

use crate::{DiffError, Graph, ParamStore, Session, Tensor, Var};

/// One checked coordinate.
#[derive(Clone, Debug)]
pub struct GradSample {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradSample {
    /// `|analytic - numeric| / max(1, |analytic|)`
    pub fn rel_err(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(1.0)
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradReport {
    pub samples: Vec<GradSample>,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.samples.iter().map(GradSample::rel_err).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradSample> {
        self.samples.iter().max_by(|a, b| a.rel_err().total_cmp(&b.rel_err()))
    }
}

/// Checks `d f / d inputs` for a scalar-valued `f`.
///
/// `f` receives a fresh graph and the leaf handles of `inputs`, and returns
/// the loss node. With `per_input = Some(n)` only `n` randomly chosen
/// coordinates of each input are checked; `None` checks them all.
pub fn check<F>(
    f: F,
    inputs: &[Tensor],
    eps: f64,
    per_input: Option<usize>,
    rng: &mut impl Rng,
) -> Result<GradReport, DiffError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, DiffError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| g.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape().to_vec())))
        .collect();

    let eval = |ins: &[Tensor]| -> Result<f64, DiffError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.constant(t.clone())).collect();
        let loss = f(&mut g, &vars)?;
        g.value(loss).item().ok_or_else(|| DiffError::NonScalarLoss(g.shape(loss).to_vec()))
    };

    let mut report = GradReport::default();
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, t) in inputs.iter().enumerate() {
        let coords: Vec<usize> = match per_input {
            Some(n) if n < t.numel() => sample(rng, t.numel(), n).into_vec(),
            _ => (0..t.numel()).collect(),
        };
        for j in coords {
            let x0 = t.data()[j];
            work[i].data_mut()[j] = x0 + eps;
            let up = eval(&work)?;
            work[i].data_mut()[j] = x0 - eps;
            let down = eval(&work)?;
            work[i].data_mut()[j] = x0;
            report.samples.push(GradSample {
                input: i,
                index: j,
                analytic: analytic[i].data()[j],
                numeric: (up - down) / (2.0 * eps),
            });
        }
    }
    Ok(report)
}

/// Checks the gradient of a loss with respect to named parameters.
///
/// `f` builds the loss on the session it is given. The analytic side runs
/// one training session; the numeric side re-runs `f` in inference sessions
/// over a perturbed copy of `store`. `GradSample::input` indexes `names`.
pub fn check_params<F, E>(
    store: &ParamStore,
    names: &[String],
    f: F,
    eps: f64,
    per_param: Option<usize>,
    rng: &mut impl Rng,
) -> Result<GradReport, E>
where
    F: Fn(&mut Session) -> Result<Var, E>,
    E: From<DiffError>,
{
    let analytic = {
        let mut s = Session::new(store);
        let loss = f(&mut s)?;
        s.backward(loss)?;
        s.param_grads()
    };
    let eval = |st: &ParamStore| -> Result<f64, E> {
        let mut s = Session::inference(st);
        let loss = f(&mut s)?;
        Ok(s.graph.value(loss).item().ok_or_else(|| DiffError::NonScalarLoss(s.graph.shape(loss).to_vec()))?)
    };

    let mut work = store.clone();
    let mut report = GradReport::default();
    for (i, name) in names.iter().enumerate() {
        let numel = store.get(name).ok_or_else(|| DiffError::UnknownParam(name.clone()))?.numel();
        let coords: Vec<usize> = match per_param {
            Some(n) if n < numel => sample(rng, numel, n).into_vec(),
            _ => (0..numel).collect(),
        };
        for j in coords {
            let x0 = store.get(name).map(|t| t.data()[j]).unwrap_or_default();
            poke(&mut work, name, j, x0 + eps);
            let up = eval(&work)?;
            poke(&mut work, name, j, x0 - eps);
            let down = eval(&work)?;
            poke(&mut work, name, j, x0);
            report.samples.push(GradSample {
                input: i,
                index: j,
                analytic: analytic.get(name).map_or(0.0, |g| g.data()[j]),
                numeric: (up - down) / (2.0 * eps),
            });
        }
    }
    Ok(report)
}

fn poke(store: &mut ParamStore, name: &str, j: usize, x: f64) {
    if let Some(t) = store.get_mut(name) {
        t.data_mut()[j] = x;
    }
}
