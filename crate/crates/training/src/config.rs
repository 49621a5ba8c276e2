use serde::{Deserialize, Serialize};
use trajplan_core::Scenario;
use trajplan_model::ModelConfig;

use crate::adam::AdamConfig;
use crate::loss::DEFAULT_LAMBDA;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Every visual vector, auxiliary embeddings included, is zeroed at load.
    BlankVisual,
    /// The decoder emits one mode.
    SingleTrajectory,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::None, Ablation::BlankVisual, Ablation::SingleTrajectory];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::BlankVisual => "blank_visual",
            Ablation::SingleTrajectory => "single_trajectory",
        }
    }

    /// Dataset-side effect of the ablation.
    pub fn apply(self, scenarios: &[Scenario]) -> Vec<Scenario> {
        match self {
            Ablation::BlankVisual => scenarios
                .iter()
                .map(|s| Scenario { visual: s.visual.blank(), ..s.clone() })
                .collect(),
            _ => scenarios.to_vec(),
        }
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown ablation {s:?} (none, blank_visual, single_trajectory)"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Cosine decay from `lr` to `min_lr` over the whole run.
    Cosine { min_lr: f64 },
}

impl LrSchedule {
    /// Learning rate for 0-based `step` out of `total`.
    pub fn lr(self, base: f64, step: u64, total: u64) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine { min_lr } => {
                let t = if total <= 1 { 0.0 } else { step.min(total - 1) as f64 / (total - 1) as f64 };
                min_lr + 0.5 * (base - min_lr) * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub model: ModelConfig,
    /// Regression weight of the loss.
    pub lambda: f64,
    pub train_ratio: f64,
    pub grad_clip: Option<f64>,
    pub schedule: LrSchedule,
    /// Parameter-name prefixes excluded from updates.
    pub frozen: Vec<String>,
    /// Parameter-name prefixes set to zero right after initialization.
    pub zero_params: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            ablation: Ablation::None,
            model: ModelConfig::default(),
            lambda: DEFAULT_LAMBDA,
            train_ratio: 0.8,
            grad_clip: None,
            schedule: LrSchedule::Constant,
            frozen: Vec::new(),
            zero_params: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut v = Vec::new();
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            v.push(format!("lr must be > 0, got {}", self.lr));
        }
        if self.batch_size == 0 {
            v.push("batch_size must be >= 1".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                v.push(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            v.push(format!("adam_eps must be > 0, got {}", self.adam_eps));
        }
        if !(self.lambda >= 0.0) {
            v.push(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            v.push(format!("train_ratio must be in (0, 1), got {}", self.train_ratio));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                v.push(format!("grad_clip must be > 0, got {c}"));
            }
        }
        if let Err(e) = self.effective_model().validate() {
            v.push(e.to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }

    /// Model config after the ablation: SingleTrajectory forces K = 1.
    pub fn effective_model(&self) -> ModelConfig {
        let mut m = self.model.clone();
        if self.ablation == Ablation::SingleTrajectory {
            m.decoder.k = 1;
        }
        m
    }
}
