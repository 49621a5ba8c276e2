use rand::Rng;
use trajplan_core::{PredictionSet, Trajectory, HORIZON};
use trajplan_diffmath::{FeedForward, Linear, MultiHeadAttention, ParamStore, Session, Var};

use crate::{DecoderConfig, ModelError, QueryMode, SceneContext, TrajectoryParam};

/// Decoder outputs on the tape.
#[derive(Clone, Copy, Debug)]
pub struct DecoderOutput {
    /// `[B, K, 20, 2]`.
    pub trajectories: Var,
    /// Mode logits `[B, K]`.
    pub logits: Var,
}

/// One intent query cross-attending to the scene context, followed by a
/// trajectory head and a mode head.
#[derive(Clone, Debug)]
pub struct Decoder {
    pub cfg: DecoderConfig,
    intent: Linear,
    fuse: Option<FeedForward>,
    cross: MultiHeadAttention,
    traj: Linear,
    mode: Linear,
}

/// Parameters of the fused-query FCN.
pub const FUSE_PREFIX: &str = "dec.fuse.";

impl Decoder {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, cfg: &DecoderConfig, d_model: usize) -> Result<Self, ModelError> {
        let di = cfg.d_intent;
        let fuse = (cfg.query_mode == QueryMode::FusedQuery).then(|| {
            let (a, b) = cfg.aux_dims;
            FeedForward::new(store, rng, "dec.fuse", di + a + b, di, di)
        });
        Ok(Self {
            cfg: cfg.clone(),
            intent: Linear::new(store, rng, "dec.intent", 3, di),
            fuse,
            cross: MultiHeadAttention::new(store, rng, "dec.cross", di, d_model, cfg.d_attn, cfg.d_attn, cfg.heads)?,
            traj: Linear::new(store, rng, "dec.traj", cfg.d_attn, cfg.k * HORIZON * 2),
            mode: Linear::new(store, rng, "dec.mode", cfg.d_attn, cfg.k),
        })
    }

    /// One-hot intents `[B, 1, 3]` to query tokens `[B, 1, d_intent]`.
    pub fn embed_intent(&self, s: &mut Session, intent: Var) -> Result<Var, ModelError> {
        Ok(self.intent.forward(s, intent)?)
    }

    /// `e + FCN([e, aux_a, aux_b])` for the intent embedding `e`. With the
    /// FCN's output layer zeroed this is exactly the intent-only query.
    pub fn fuse_query(&self, s: &mut Session, intent: Var, aux_a: Var, aux_b: Var) -> Result<Var, ModelError> {
        let fuse = self.fuse.as_ref().ok_or_else(|| ModelError::Config("decoder is not FusedQuery".into()))?;
        let (a, b) = self.cfg.aux_dims;
        for (v, d, what) in [(aux_a, a, "aux_a"), (aux_b, b, "aux_b")] {
            let sh = s.graph.shape(v);
            if sh.len() != 3 || sh[1] != 1 || sh[2] != d {
                return Err(ModelError::Shape(format!("{what} {sh:?}, expected [B, 1, {d}]")));
            }
        }
        let e = self.embed_intent(s, intent)?;
        let cat = s.graph.concat(&[e, aux_a, aux_b], 2)?;
        let f = fuse.forward(s, cat)?;
        Ok(s.graph.add(e, f)?)
    }

    pub fn decode(&self, s: &mut Session, query: Var, ctx: SceneContext) -> Result<DecoderOutput, ModelError> {
        let qs = s.graph.shape(query).to_vec();
        if qs.len() != 3 || qs[1] != 1 || qs[2] != self.cfg.d_intent {
            return Err(ModelError::Shape(format!("query {qs:?}, expected [B, 1, {}]", self.cfg.d_intent)));
        }
        let cs = s.graph.shape(ctx.tokens).to_vec();
        let d_model = self.cross.k.in_dim;
        if cs.len() != 3 || cs[0] != qs[0] || cs[2] != d_model {
            return Err(ModelError::Shape(format!("context {cs:?}, expected [{}, L, {d_model}]", qs[0])));
        }
        let b = qs[0];
        let k = self.cfg.k;
        let h = self.cross.forward(s, query, ctx.tokens)?;
        let t = self.traj.forward(s, h)?;
        let mut t = s.graph.reshape(t, &[b, k, HORIZON, 2])?;
        if self.cfg.trajectory == TrajectoryParam::Offsets {
            t = s.graph.cumsum(t, 2)?;
        }
        let m = self.mode.forward(s, h)?;
        let logits = s.graph.reshape(m, &[b, k])?;
        Ok(DecoderOutput { trajectories: t, logits })
    }
}

/// The `k` most probable modes in descending probability, ties to the lower
/// mode index.
pub fn select_topk(p: &PredictionSet, k: usize) -> Result<Vec<(Trajectory, f64)>, ModelError> {
    if k == 0 || k > p.k() {
        return Err(ModelError::KOutOfRange { k, modes: p.k() });
    }
    Ok(p.ranked_indices().into_iter().take(k).map(|i| (p.modes[i].clone(), p.probs[i])).collect())
}
