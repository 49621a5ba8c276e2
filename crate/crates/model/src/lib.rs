//! Scene encoder and trajectory decoder.
//!
//! The encoder embeds 16 normalized ego states (6 → `d_model` plus a learned
//! position table), runs a pre-norm self-attention stack and fuses the
//! visual feature either as a 17th token (Concat) or by cross-attention from
//! the state tokens (VisionFusion). The decoder turns the intent (optionally
//! fused with two auxiliary embeddings) into one query token, cross-attends
//! to the scene context and emits K trajectories of 20 waypoints plus mode
//! logits.

mod batch;
mod config;
mod decoder;
mod encoder;
mod normalize;

pub use batch::Batch;
pub use config::{DecoderConfig, EncoderConfig, EncoderVariant, ModelConfig, QueryMode, TrajectoryParam};
pub use decoder::{select_topk, Decoder, DecoderOutput, FUSE_PREFIX};
pub use encoder::{Encoder, SceneContext, ENCODER_PREFIX, VISUAL_PROJ_PREFIX};
pub use normalize::Normalizer;

use thiserror::Error;
use trajplan_core::{CoreError, PredictionSet, Scenario, Trajectory, HORIZON};
use trajplan_diffmath::{seeded_rng, DiffError, ParamStore, Session};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what}: expected {expected}, got {got}")]
    Dim { what: &'static str, expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("fused query needs aux_a and aux_b on every scenario")]
    MissingAux,
    #[error("k = {k} outside 1..={modes}")]
    KOutOfRange { k: usize, modes: usize },
    #[error("parameters do not match the config: {0}")]
    ParamMismatch(String),
}

/// RNG stream used for parameter initialization.
pub const INIT_STREAM: u64 = 0x1417;

/// Rows per forward pass in [`Model::predict`].
pub const PREDICT_CHUNK: usize = 64;

/// Encoder, decoder, their parameters and the input normalization.
#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: ParamStore,
    pub norm: Normalizer,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl Model {
    /// Freshly initialized model; the same `(cfg, seed)` gives the same
    /// parameters.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        let mut rng = seeded_rng(seed, INIT_STREAM);
        let encoder = Encoder::new(&mut params, &mut rng, &cfg.encoder)?;
        let decoder = Decoder::new(&mut params, &mut rng, &cfg.decoder, cfg.encoder.d_model)?;
        Ok(Self { cfg, params, norm: Normalizer::default(), encoder, decoder })
    }

    /// Rebuilds a model around stored parameters, which must have exactly
    /// the names and shapes `cfg` implies.
    pub fn from_params(cfg: ModelConfig, params: ParamStore, norm: Normalizer) -> Result<Self, ModelError> {
        let fresh = Self::new(cfg, 0)?;
        let expect: Vec<_> = fresh.params.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
        let got: Vec<_> = params.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
        if expect != got {
            let missing: Vec<_> = expect.iter().filter(|e| !got.contains(e)).map(|e| e.0.as_str()).collect();
            let extra: Vec<_> = got.iter().filter(|g| !expect.contains(g)).map(|g| g.0.as_str()).collect();
            return Err(ModelError::ParamMismatch(format!("missing {missing:?}, unexpected {extra:?}")));
        }
        Ok(Self { params, norm, ..fresh })
    }

    pub fn batch(&self, scenarios: &[&Scenario]) -> Result<Batch, ModelError> {
        Batch::new(scenarios, &self.norm)
    }

    /// Query tokens `[B, 1, d_intent]` for the configured query mode.
    pub fn query(&self, s: &mut Session, batch: &Batch) -> Result<trajplan_diffmath::Var, ModelError> {
        let intent = s.input(batch.intent.clone());
        match self.cfg.decoder.query_mode {
            QueryMode::IntentOnly => self.decoder.embed_intent(s, intent),
            QueryMode::FusedQuery => {
                let (Some(a), Some(b)) = (&batch.aux_a, &batch.aux_b) else { return Err(ModelError::MissingAux) };
                let (a, b) = (s.input(a.clone()), s.input(b.clone()));
                self.decoder.fuse_query(s, intent, a, b)
            }
        }
    }

    pub fn forward(&self, s: &mut Session, batch: &Batch) -> Result<DecoderOutput, ModelError> {
        let states = s.input(batch.states.clone());
        let visual = s.input(batch.visual.clone());
        let ctx = self.encoder.encode(s, states, visual)?;
        let q = self.query(s, batch)?;
        self.decoder.decode(s, q, ctx)
    }

    /// K modes and their probabilities for every scenario.
    pub fn predict(&self, scenarios: &[Scenario]) -> Result<Vec<PredictionSet>, ModelError> {
        let mut out = Vec::with_capacity(scenarios.len());
        let k = self.cfg.decoder.k;
        for chunk in scenarios.chunks(PREDICT_CHUNK) {
            let refs: Vec<&Scenario> = chunk.iter().collect();
            let batch = self.batch(&refs)?;
            let mut s = Session::inference(&self.params);
            let o = self.forward(&mut s, &batch)?;
            let probs = s.graph.softmax(o.logits, 1)?;
            let traj = s.graph.value(o.trajectories).data();
            let probs = s.graph.value(probs).data();
            for i in 0..chunk.len() {
                let modes = (0..k)
                    .map(|m| {
                        let base = (i * k + m) * HORIZON * 2;
                        Trajectory { waypoints: (0..HORIZON).map(|t| [traj[base + 2 * t], traj[base + 2 * t + 1]]).collect() }
                    })
                    .collect();
                out.push(PredictionSet::new(modes, probs[i * k..(i + 1) * k].to_vec())?);
            }
        }
        Ok(out)
    }
}
