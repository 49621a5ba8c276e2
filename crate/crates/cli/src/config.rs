//! TOML config file and flag merging. Precedence: explicit flag, then the
//! config file, then built-in defaults.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use trajplan_core::Scenario;
use trajplan_model::{EncoderVariant, ModelConfig, QueryMode};
use trajplan_scenariogen::{GenConfig, GenMode};
use trajplan_training::{Ablation, TrainConfig};

use crate::files::read_text;
use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub generate: Option<GenConfig>,
    pub train: Option<TrainConfig>,
    pub ablate: Option<GridConfig>,
}

/// Axes of the ablation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub variants: Vec<EncoderVariant>,
    pub ablations: Vec<Ablation>,
    pub queries: Vec<QueryMode>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            variants: vec![EncoderVariant::Concat, EncoderVariant::VisionFusion],
            ablations: Ablation::ALL.to_vec(),
            queries: vec![QueryMode::IntentOnly, QueryMode::FusedQuery],
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::input(p, e)),
    }
}

pub fn parse_variant(s: &str) -> Result<EncoderVariant, String> {
    match s.replace('_', "-").as_str() {
        "concat" => Ok(EncoderVariant::Concat),
        "vision-fusion" => Ok(EncoderVariant::VisionFusion),
        _ => Err(format!("unknown variant {s:?} (concat, vision-fusion)")),
    }
}

pub fn parse_query(s: &str) -> Result<QueryMode, String> {
    match s.replace('_', "-").as_str() {
        "intent-only" | "intent" => Ok(QueryMode::IntentOnly),
        "fused-query" | "fused" => Ok(QueryMode::FusedQuery),
        _ => Err(format!("unknown query mode {s:?} (intent-only, fused)")),
    }
}

pub fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse()
}

pub fn parse_mode(s: &str) -> Result<GenMode, String> {
    match s.replace('-', "_").as_str() {
        "standard" => Ok(GenMode::Standard),
        "multimodal" => Ok(GenMode::Multimodal),
        "visual_necessary" => Ok(GenMode::VisualNecessary),
        _ => Err(format!("unknown mode {s:?} (standard, multimodal, visual-necessary)")),
    }
}

pub fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,B, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

pub fn variant_name(v: EncoderVariant) -> &'static str {
    match v {
        EncoderVariant::Concat => "concat",
        EncoderVariant::VisionFusion => "vision-fusion",
    }
}

pub fn query_name(q: QueryMode) -> &'static str {
    match q {
        QueryMode::IntentOnly => "intent-only",
        QueryMode::FusedQuery => "fused",
    }
}

/// Training flags shared by `train` and `ablate`.
#[derive(Args, Clone, Debug, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// concat or vision-fusion
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<EncoderVariant>,
    /// intent-only or fused
    #[arg(long, value_parser = parse_query)]
    pub query: Option<QueryMode>,
    /// none, blank_visual or single_trajectory
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<Ablation>,
    /// Number of predicted modes.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "d-model")]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long = "batch")]
    pub batch: Option<usize>,
}

impl TrainFlags {
    pub fn resolve(&self, file: &FileConfig) -> TrainConfig {
        let mut c = file.train.clone().unwrap_or_default();
        if let Some(x) = self.seed {
            c.seed = x;
        }
        if let Some(x) = self.variant {
            c.model.encoder.variant = x;
        }
        if let Some(x) = self.query {
            c.model.decoder.query_mode = x;
        }
        if let Some(x) = self.ablation {
            c.ablation = x;
        }
        if let Some(x) = self.k {
            c.model.decoder.k = x;
        }
        if let Some(x) = self.d_model {
            c.model.encoder.d_model = x;
        }
        if let Some(x) = self.epochs {
            c.epochs = x;
        }
        if let Some(x) = self.lr {
            c.lr = x;
        }
        if let Some(x) = self.batch {
            c.batch_size = x;
        }
        c
    }
}

/// Input widths are read off the data: the visual width and, when the
/// scenarios carry them, the auxiliary widths.
pub fn fit_dims(model: &mut ModelConfig, scenarios: &[Scenario]) {
    if let Some(s) = scenarios.first() {
        model.encoder.d_vis = s.visual.dim();
        if let (Some(a), Some(b)) = (&s.visual.aux_a, &s.visual.aux_b) {
            model.decoder.aux_dims = (a.len(), b.len());
        }
    }
}

pub fn check_train(cfg: &TrainConfig, scenarios: &[Scenario], path: &Path) -> Result<(), CliError> {
    cfg.validate().map_err(|v| CliError::Usage(format!("invalid training config: {}", v.join("; "))))?;
    if cfg.model.decoder.query_mode == QueryMode::FusedQuery
        && scenarios.iter().any(|s| s.visual.aux_a.is_none() || s.visual.aux_b.is_none())
    {
        return Err(CliError::input(path, "fused query needs auxiliary embeddings on every scenario"));
    }
    let d = cfg.model.encoder.d_vis;
    if let Some(s) = scenarios.iter().find(|s| s.visual.dim() != d) {
        return Err(CliError::input(path, format!("scenario {} has visual width {}, expected {d}", s.id, s.visual.dim())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let file: FileConfig = toml::from_str("[train]\nlr = 0.01\nepochs = 7\n[train.model.encoder]\nd_model = 32\n").unwrap();
        let flags = TrainFlags { epochs: Some(3), ..TrainFlags::default() };
        let c = flags.resolve(&file);
        assert_eq!((c.lr, c.epochs, c.model.encoder.d_model), (0.01, 3, 32));
        assert_eq!(c.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[trian]\nlr = 1\n").is_err());
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_variant("vision_fusion"), Ok(EncoderVariant::VisionFusion));
        assert_eq!(parse_query("fused"), Ok(QueryMode::FusedQuery));
        assert_eq!(parse_mode("visual-necessary"), Ok(GenMode::VisualNecessary));
        assert_eq!(parse_pair("512, 768"), Ok((512, 768)));
        assert!(parse_pair("512").is_err());
    }
}
