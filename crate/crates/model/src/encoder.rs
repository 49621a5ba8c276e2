use rand::Rng;
use trajplan_core::{HISTORY_STEPS, STATE_DIM};
use trajplan_diffmath::{FeedForward, LayerNorm, Linear, MultiHeadAttention, ParamStore, Session, Tensor, Var};

use crate::{EncoderConfig, EncoderVariant, ModelError};

/// Scene context tokens `[B, L, d_model]`: 17 for Concat, 16 for
/// VisionFusion.
#[derive(Clone, Copy, Debug)]
pub struct SceneContext {
    pub tokens: Var,
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    ln2: LayerNorm,
    ffn: FeedForward,
}

/// Pre-norm transformer over the 16 state tokens plus the visual fusion
/// step of the configured variant.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub cfg: EncoderConfig,
    state_proj: Linear,
    pos: String,
    layers: Vec<EncoderLayer>,
    visual_proj: Option<Linear>,
    fusion: Option<MultiHeadAttention>,
}

pub const ENCODER_PREFIX: &str = "enc.";
/// Parameters of the Concat visual projection.
pub const VISUAL_PROJ_PREFIX: &str = "enc.visual.";

impl Encoder {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, cfg: &EncoderConfig) -> Result<Self, ModelError> {
        let d = cfg.d_model;
        let state_proj = Linear::new(store, rng, "enc.state", STATE_DIM, d);
        let pos = "enc.pos".to_string();
        store.insert(&pos, Tensor::from_fn([HISTORY_STEPS, d], |_| rng.gen_range(-0.1..0.1)));
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let name = format!("enc.layer{l}");
            layers.push(EncoderLayer {
                ln1: LayerNorm::new(store, &format!("{name}.ln1"), d),
                attn: MultiHeadAttention::new(store, rng, &format!("{name}.attn"), d, d, d, d, cfg.heads)?,
                ln2: LayerNorm::new(store, &format!("{name}.ln2"), d),
                ffn: FeedForward::new(store, rng, &format!("{name}.ffn"), d, 4 * d, d),
            });
        }
        let (visual_proj, fusion) = match cfg.variant {
            EncoderVariant::Concat => (Some(Linear::new(store, rng, "enc.visual", cfg.d_vis, d)), None),
            EncoderVariant::VisionFusion => {
                (None, Some(MultiHeadAttention::new(store, rng, "enc.fusion", d, cfg.d_vis, d, d, cfg.heads)?))
            }
        };
        Ok(Self { cfg: cfg.clone(), state_proj, pos, layers, visual_proj, fusion })
    }

    /// Embeds normalized states `[B, 16, 6]` and runs the self-attention
    /// stack, giving `[B, 16, d_model]`.
    pub fn embed_states(&self, s: &mut Session, states: Var) -> Result<Var, ModelError> {
        let shape = s.graph.shape(states).to_vec();
        if shape.len() != 3 || shape[1] != HISTORY_STEPS || shape[2] != STATE_DIM {
            return Err(ModelError::Shape(format!("states {shape:?}, expected [B, 16, 6]")));
        }
        let x = self.state_proj.forward(s, states)?;
        let pos = s.param(&self.pos)?;
        let mut x = s.graph.add(x, pos)?;
        for layer in &self.layers {
            let h = layer.ln1.forward(s, x)?;
            let h = layer.attn.forward(s, h, h)?;
            x = s.graph.add(x, h)?;
            let h = layer.ln2.forward(s, x)?;
            let h = layer.ffn.forward(s, h)?;
            x = s.graph.add(x, h)?;
        }
        Ok(x)
    }

    fn check_visual(&self, s: &Session, visual: Var) -> Result<(), ModelError> {
        let shape = s.graph.shape(visual);
        if shape.len() != 3 || shape[2] != self.cfg.d_vis {
            return Err(ModelError::Shape(format!("visual {shape:?}, expected [B, P, {}]", self.cfg.d_vis)));
        }
        Ok(())
    }

    /// State tokens followed by the projected visual vector as token 17.
    pub fn encode_concat(&self, s: &mut Session, states: Var, visual: Var) -> Result<SceneContext, ModelError> {
        let proj = self.visual_proj.as_ref().ok_or_else(|| ModelError::Config("encoder is not Concat".into()))?;
        self.check_visual(s, visual)?;
        if s.graph.shape(visual)[1] != 1 {
            return Err(ModelError::Shape("Concat takes exactly one visual token".into()));
        }
        let x = self.embed_states(s, states)?;
        let v = proj.forward(s, visual)?;
        Ok(SceneContext { tokens: s.graph.concat(&[x, v], 1)? })
    }

    /// State tokens plus their cross-attention over the visual tokens.
    pub fn encode_vision_fusion(&self, s: &mut Session, states: Var, visual: Var) -> Result<SceneContext, ModelError> {
        let fusion = self.fusion.as_ref().ok_or_else(|| ModelError::Config("encoder is not VisionFusion".into()))?;
        self.check_visual(s, visual)?;
        let x = self.embed_states(s, states)?;
        let f = fusion.forward(s, x, visual)?;
        Ok(SceneContext { tokens: s.graph.add(x, f)? })
    }

    pub fn encode(&self, s: &mut Session, states: Var, visual: Var) -> Result<SceneContext, ModelError> {
        match self.cfg.variant {
            EncoderVariant::Concat => self.encode_concat(s, states, visual),
            EncoderVariant::VisionFusion => self.encode_vision_fusion(s, states, visual),
        }
    }

    /// Names of the self-attention and feed-forward parameters of every layer.
    pub fn block_param_prefixes(&self) -> Vec<String> {
        (0..self.layers.len()).flat_map(|l| [format!("enc.layer{l}.attn."), format!("enc.layer{l}.ffn.")]).collect()
    }
}
