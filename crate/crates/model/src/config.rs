use serde::{Deserialize, Serialize};
use trajplan_core::{DEFAULT_AUX_A_DIM, DEFAULT_AUX_B_DIM};

use crate::ModelError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderVariant {
    /// The projected visual vector is appended as a 17th token.
    #[default]
    Concat,
    /// State tokens cross-attend to the visual tokens.
    VisionFusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub d_vis: usize,
    pub variant: EncoderVariant,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { d_model: 64, heads: 8, layers: 4, d_vis: DEFAULT_AUX_B_DIM, variant: EncoderVariant::Concat }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// The intent embedding is the query.
    #[default]
    IntentOnly,
    /// The intent embedding plus an FCN over it and two auxiliary embeddings.
    FusedQuery,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryParam {
    /// The head emits per-step displacements; waypoints are their prefix sums.
    #[default]
    Offsets,
    /// The head emits waypoints directly.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub d_intent: usize,
    pub d_attn: usize,
    pub heads: usize,
    pub k: usize,
    pub query_mode: QueryMode,
    /// Dimensions of the auxiliary embeddings read in fused-query mode.
    pub aux_dims: (usize, usize),
    pub trajectory: TrajectoryParam,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            d_intent: 128,
            d_attn: 512,
            heads: 8,
            k: 20,
            query_mode: QueryMode::IntentOnly,
            aux_dims: (DEFAULT_AUX_A_DIM, DEFAULT_AUX_B_DIM),
            trajectory: TrajectoryParam::Offsets,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let (e, d) = (&self.encoder, &self.decoder);
        let mut v = Vec::new();
        for (name, x) in [
            ("d_model", e.d_model),
            ("encoder heads", e.heads),
            ("d_vis", e.d_vis),
            ("d_intent", d.d_intent),
            ("d_attn", d.d_attn),
            ("decoder heads", d.heads),
            ("k", d.k),
        ] {
            if x == 0 {
                v.push(format!("{name} must be >= 1"));
            }
        }
        if e.heads > 0 && e.d_model % e.heads != 0 {
            v.push(format!("d_model {} not divisible by {} heads", e.d_model, e.heads));
        }
        if d.heads > 0 && d.d_attn % d.heads != 0 {
            v.push(format!("d_attn {} not divisible by {} heads", d.d_attn, d.heads));
        }
        if d.query_mode == QueryMode::FusedQuery && (d.aux_dims.0 == 0 || d.aux_dims.1 == 0) {
            v.push("fused query needs nonzero aux dimensions".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Config(v.join("; ")))
        }
    }
}
