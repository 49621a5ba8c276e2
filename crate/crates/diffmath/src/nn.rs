//! Named parameters and the transformer building blocks built on the tape.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{DiffError, Graph, Tensor, Var};

/// Deterministic counter-based generator for `seed`, on an independent
/// `stream`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Glorot/Xavier uniform init in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn([fan_in, fan_out], |_| rng.gen_range(-limit..limit))
}

/// Parameter tensors keyed by stable dotted names. Iteration is in name
/// order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Re-registering a name is a programming error.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        let prev = self.params.insert(name.clone(), t);
        assert!(prev.is_none(), "parameter `{name}` registered twice");
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    /// Replaces the value of an existing parameter; the shape must match.
    pub fn set(&mut self, name: &str, t: Tensor) -> Result<(), DiffError> {
        let slot = self.params.get_mut(name).ok_or_else(|| DiffError::UnknownParam(name.into()))?;
        if slot.shape() != t.shape() {
            return Err(DiffError::shape("set", format!("{name}: {:?} vs {:?}", slot.shape(), t.shape())));
        }
        *slot = t;
        Ok(())
    }

    /// Sets every parameter whose name starts with `prefix` to zero.
    /// Returns how many tensors were touched.
    pub fn zero_prefix(&mut self, prefix: &str) -> usize {
        let mut n = 0;
        for (name, t) in self.params.iter_mut() {
            if name.starts_with(prefix) {
                t.data_mut().iter_mut().for_each(|v| *v = 0.0);
                n += 1;
            }
        }
        n
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }
}

/// One forward pass: a fresh tape plus the bindings of parameters onto it.
pub struct Session<'s> {
    pub graph: Graph,
    store: &'s ParamStore,
    bound: HashMap<String, Var>,
    track_grads: bool,
    frozen: Vec<String>,
}

impl<'s> Session<'s> {
    /// A session whose parameters require gradients.
    pub fn new(store: &'s ParamStore) -> Self {
        Self { graph: Graph::new(), store, bound: HashMap::new(), track_grads: true, frozen: vec![] }
    }

    /// A session that records no gradients.
    pub fn inference(store: &'s ParamStore) -> Self {
        Self { track_grads: false, ..Self::new(store) }
    }

    /// Parameters whose names start with any of `prefixes` are bound as
    /// constants and therefore receive no gradient.
    pub fn with_frozen(mut self, prefixes: &[String]) -> Self {
        self.frozen = prefixes.to_vec();
        self
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    /// The tape node of parameter `name`, bound on first use.
    pub fn param(&mut self, name: &str) -> Result<Var, DiffError> {
        if let Some(v) = self.bound.get(name) {
            return Ok(*v);
        }
        let t = self.store.get(name).ok_or_else(|| DiffError::UnknownParam(name.into()))?.clone();
        let trainable = self.track_grads && !self.frozen.iter().any(|p| name.starts_with(p.as_str()));
        let v = self.graph.leaf(t, trainable);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.graph.constant(t)
    }

    /// The bound node for `name`, if the forward pass used it.
    pub fn bound(&self, name: &str) -> Option<Var> {
        self.bound.get(name).copied()
    }

    pub fn backward(&mut self, loss: Var) -> Result<(), DiffError> {
        self.graph.backward(loss)
    }

    /// Gradients of every bound parameter that was reached by `backward`.
    pub fn param_grads(&self) -> BTreeMap<String, Tensor> {
        self.bound
            .iter()
            .filter_map(|(name, v)| self.graph.grad(*v).map(|g| (name.clone(), g.clone())))
            .collect()
    }
}

/// `y = x · W + b` with `W: [in, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: String,
    pub bias: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let weight = format!("{name}.weight");
        let bias = format!("{name}.bias");
        store.insert(&weight, glorot_uniform(in_dim, out_dim, rng));
        store.insert(&bias, Tensor::zeros([out_dim]));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var, DiffError> {
        let w = s.param(&self.weight)?;
        let b = s.param(&self.bias)?;
        s.graph.linear(x, w, b)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: String,
    pub bias: String,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gain = format!("{name}.gain");
        let bias = format!("{name}.bias");
        store.insert(&gain, Tensor::ones([dim]));
        store.insert(&bias, Tensor::zeros([dim]));
        Self { gain, bias }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var, DiffError> {
        let g = s.param(&self.gain)?;
        let b = s.param(&self.bias)?;
        s.graph.layer_norm(x, g, b)
    }
}

/// Two linear layers with a ReLU between them.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, dim: usize, hidden: usize, out: usize) -> Self {
        Self {
            fc1: Linear::new(store, rng, &format!("{name}.fc1"), dim, hidden),
            fc2: Linear::new(store, rng, &format!("{name}.fc2"), hidden, out),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var, DiffError> {
        let h = self.fc1.forward(s, x)?;
        let h = s.graph.relu(h);
        self.fc2.forward(s, h)
    }
}

/// Projection weights of one attention block, already bound on a tape.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionVars {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

/// Scaled dot-product attention over `heads` heads.
///
/// `q: [B, Lq, dq]`, `k, v: [B, Lk, dk]`. Queries, keys and values are
/// projected to width `D` (the column count of `wq`), split into heads of
/// width `D / heads`, scaled by `1/sqrt(D / heads)`, concatenated and passed
/// through the output projection. Returns the output and the attention
/// weights `[B, heads, Lq, Lk]`.
pub fn multi_head_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    p: &ProjectionVars,
    heads: usize,
) -> Result<(Var, Var), DiffError> {
    let (sq, sk, sv) = (g.shape(q).to_vec(), g.shape(k).to_vec(), g.shape(v).to_vec());
    if sq.len() != 3 || sk.len() != 3 || sv.len() != 3 || sq[0] != sk[0] || sk[..2] != sv[..2] {
        return Err(DiffError::shape("attention", format!("q {sq:?}, k {sk:?}, v {sv:?}")));
    }
    let (b, lq, lk) = (sq[0], sq[1], sk[1]);
    let d = g.shape(p.wq)[1];
    if heads == 0 || d % heads != 0 {
        return Err(DiffError::shape("attention", format!("{heads} heads do not divide width {d}")));
    }
    let dh = d / heads;
    let qp = g.linear(q, p.wq, p.bq)?;
    let kp = g.linear(k, p.wk, p.bk)?;
    let vp = g.linear(v, p.wv, p.bv)?;
    if g.shape(kp)[2] != d || g.shape(vp)[2] != d {
        return Err(DiffError::shape("attention", "q, k and v projections differ in width"));
    }
    let split = |g: &mut Graph, x: Var, len: usize| -> Result<Var, DiffError> {
        let x = g.reshape(x, &[b, len, heads, dh])?;
        g.permute(x, &[0, 2, 1, 3])
    };
    let qh = split(g, qp, lq)?;
    let kh = split(g, kp, lk)?;
    let vh = split(g, vp, lk)?;
    let scores = g.matmul_nt(qh, kh)?;
    let scores = g.scale(scores, 1.0 / (dh as f64).sqrt());
    let weights = g.softmax(scores, 3)?;
    let ctx = g.matmul(weights, vh)?;
    let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
    let ctx = g.reshape(ctx, &[b, lq, d])?;
    let out = g.linear(ctx, p.wo, p.bo)?;
    Ok((out, weights))
}

/// Attention block with its own projections, stored under `{name}.q`,
/// `{name}.k`, `{name}.v` and `{name}.o`.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        q_dim: usize,
        kv_dim: usize,
        width: usize,
        out_dim: usize,
        heads: usize,
    ) -> Result<Self, DiffError> {
        if heads == 0 || width % heads != 0 {
            return Err(DiffError::Config(format!("{name}: {heads} heads do not divide width {width}")));
        }
        Ok(Self {
            q: Linear::new(store, rng, &format!("{name}.q"), q_dim, width),
            k: Linear::new(store, rng, &format!("{name}.k"), kv_dim, width),
            v: Linear::new(store, rng, &format!("{name}.v"), kv_dim, width),
            o: Linear::new(store, rng, &format!("{name}.o"), width, out_dim),
            heads,
        })
    }

    pub fn bind(&self, s: &mut Session) -> Result<ProjectionVars, DiffError> {
        Ok(ProjectionVars {
            wq: s.param(&self.q.weight)?,
            bq: s.param(&self.q.bias)?,
            wk: s.param(&self.k.weight)?,
            bk: s.param(&self.k.bias)?,
            wv: s.param(&self.v.weight)?,
            bv: s.param(&self.v.bias)?,
            wo: s.param(&self.o.weight)?,
            bo: s.param(&self.o.bias)?,
        })
    }

    /// Attention of `query` tokens over `context` tokens (keys = values).
    pub fn forward(&self, s: &mut Session, query: Var, context: Var) -> Result<Var, DiffError> {
        let p = self.bind(s)?;
        Ok(multi_head_attention(&mut s.graph, query, context, context, &p, self.heads)?.0)
    }
}
