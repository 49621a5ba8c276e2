#![allow(dead_code)]

use trajplan_core::Scenario;
use trajplan_model::{DecoderConfig, EncoderConfig, EncoderVariant, ModelConfig, QueryMode};
use trajplan_scenariogen::{generate, GenConfig};
use trajplan_training::TrainConfig;

pub const D_VIS: usize = 8;
pub const AUX: (usize, usize) = (5, 7);

pub fn scenarios(n: usize, seed: u64) -> Vec<Scenario> {
    generate(&GenConfig { n, seed, d_vis: D_VIS, aux_dims: Some(AUX), ..GenConfig::default() }).unwrap()
}

pub fn model_config(variant: EncoderVariant, query_mode: QueryMode, k: usize) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig { d_model: 16, heads: 4, layers: 2, d_vis: D_VIS, variant },
        decoder: DecoderConfig { d_intent: 8, d_attn: 16, heads: 4, k, query_mode, aux_dims: AUX, ..DecoderConfig::default() },
    }
}

pub fn train_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        lr: 3e-3,
        seed: 11,
        model: model_config(EncoderVariant::Concat, QueryMode::IntentOnly, 3),
        ..TrainConfig::default()
    }
}
