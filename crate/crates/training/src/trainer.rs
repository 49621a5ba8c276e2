use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use trajplan_core::Scenario;
use trajplan_diffmath::{seeded_rng, Session};
use trajplan_metrics::evaluate;
use trajplan_model::{Model, ModelError, Normalizer};

use crate::adam::{adam_step, clip_grad_norm, AdamState};
use crate::checkpoint::{Checkpoint, RngState};
use crate::config::TrainConfig;
use crate::loss::wta_loss_graph;
use crate::split::split_dataset;
use crate::TrainError;

/// First RNG stream of the per-epoch shuffles; epoch `e` uses `SHUFFLE_STREAM + e`.
pub const SHUFFLE_STREAM: u64 = 0x5_0000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub train_loss: f64,
    pub val_ade1_3s: Option<f64>,
    pub val_ade1_5s: Option<f64>,
    pub val_ade5_5s: Option<f64>,
    pub val_rfs: Option<f64>,
}

pub const LOG_HEADER: &str = "epoch,train_loss,val_ade1@3s,val_ade1@5s,val_ade5@5s,val_rfs";

pub fn write_log_csv<W: Write>(mut w: W, log: &[EpochLog]) -> std::io::Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for e in log {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.epoch,
            e.train_loss,
            opt(e.val_ade1_3s),
            opt(e.val_ade1_5s),
            opt(e.val_ade5_5s),
            opt(e.val_rfs)
        )?;
    }
    Ok(())
}

/// Training state: the split dataset, the model and the optimizer.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub train: Vec<Scenario>,
    pub val: Vec<Scenario>,
    pub model: Model,
    pub adam: AdamState,
    pub epoch: usize,
    pub log: Vec<EpochLog>,
}

impl Trainer {
    /// Applies the ablation, splits, fits the normalizer on the training part
    /// and initializes the model from `cfg.seed`.
    pub fn new(dataset: &[Scenario], cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate().map_err(TrainError::Config)?;
        let (train, val) = Self::prepare(dataset, &cfg)?;
        let mut model = Model::new(cfg.effective_model(), cfg.seed)?;
        model.norm = Normalizer::fit(&train);
        for p in &cfg.zero_params {
            model.params.zero_prefix(p);
        }
        Ok(Self { cfg, train, val, model, adam: AdamState::default(), epoch: 0, log: Vec::new() })
    }

    /// Continues from a checkpoint taken on the same dataset.
    pub fn resume(dataset: &[Scenario], ckpt: Checkpoint) -> Result<Self, TrainError> {
        ckpt.config.validate().map_err(TrainError::Config)?;
        let (train, val) = Self::prepare(dataset, &ckpt.config)?;
        let model = ckpt.model()?;
        let expect = RngState { seed: ckpt.config.seed, stream: SHUFFLE_STREAM + ckpt.epoch as u64 };
        if ckpt.rng != expect {
            return Err(TrainError::Format(format!("rng state {:?} does not match epoch {}", ckpt.rng, ckpt.epoch)));
        }
        Ok(Self { cfg: ckpt.config, train, val, model, adam: ckpt.adam, epoch: ckpt.epoch, log: ckpt.log })
    }

    fn prepare(dataset: &[Scenario], cfg: &TrainConfig) -> Result<(Vec<Scenario>, Vec<Scenario>), TrainError> {
        if dataset.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let data = cfg.ablation.apply(dataset);
        let (train, val) = split_dataset(&data, cfg.train_ratio, cfg.seed)?;
        if train.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        Ok((train, val))
    }

    fn steps_per_epoch(&self) -> u64 {
        self.train.len().div_ceil(self.cfg.batch_size) as u64
    }

    /// Loss of one batch and, unless `update` is false, one optimizer step.
    fn step(&mut self, idx: &[usize], update: bool, lr: f64) -> Result<f64, TrainError> {
        let refs: Vec<&Scenario> = idx.iter().map(|&i| &self.train[i]).collect();
        let batch = self.model.batch(&refs)?;
        let targets: Vec<_> = refs.iter().map(|s| &s.driven_future).collect();
        let mut grads = {
            let mut s = if update {
                Session::new(&self.model.params).with_frozen(&self.cfg.frozen)
            } else {
                Session::inference(&self.model.params)
            };
            let out = self.model.forward(&mut s, &batch)?;
            let (loss, _) = wta_loss_graph(&mut s.graph, out.trajectories, out.logits, &targets, self.cfg.lambda)?;
            let value = s.graph.value(loss).item().expect("scalar loss");
            if !value.is_finite() {
                return Err(TrainError::Diverged { epoch: self.epoch + 1, step: self.adam.step, loss: value });
            }
            if !update {
                return Ok(value);
            }
            s.backward(loss)?;
            (s.param_grads(), value)
        };
        if let Some(c) = self.cfg.grad_clip {
            clip_grad_norm(&mut grads.0, c);
        }
        adam_step(&mut self.model.params, &grads.0, &mut self.adam, &self.cfg.adam(), lr)?;
        if let Some((name, _)) = self.model.params.iter().find(|(_, t)| !t.is_finite()) {
            let what = format!("parameter {name}");
            return Err(TrainError::NonFinite { epoch: self.epoch + 1, step: self.adam.step, what });
        }
        Ok(grads.1)
    }

    /// Mean loss over the training split at the current parameters.
    pub fn train_loss(&mut self) -> Result<f64, TrainError> {
        let n = self.train.len();
        let mut total = 0.0;
        for start in (0..n).step_by(self.cfg.batch_size) {
            let idx: Vec<usize> = (start..(start + self.cfg.batch_size).min(n)).collect();
            total += self.step(&idx, false, 0.0)? * idx.len() as f64;
        }
        Ok(total / n as f64)
    }

    pub fn run_epoch(&mut self) -> Result<EpochLog, TrainError> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut seeded_rng(self.cfg.seed, SHUFFLE_STREAM + self.epoch as u64));
        let total = self.steps_per_epoch() * self.cfg.epochs as u64;
        let mut sum = 0.0;
        for idx in order.chunks(self.cfg.batch_size) {
            let lr = self.cfg.schedule.lr(self.cfg.lr, self.adam.step, total);
            sum += self.step(idx, true, lr)? * idx.len() as f64;
        }
        self.epoch += 1;
        let mut entry = EpochLog { epoch: self.epoch, train_loss: sum / self.train.len() as f64, ..EpochLog::default() };
        if !self.val.is_empty() {
            // finite parameters can still overflow in the forward pass
            let preds = self.model.predict(&self.val).map_err(|e| match e {
                ModelError::Core(c) => {
                    TrainError::NonFinite { epoch: self.epoch, step: self.adam.step, what: format!("validation output ({c})") }
                }
                e => e.into(),
            })?;
            let r = evaluate(&preds, &self.val)?;
            entry.val_ade1_3s = Some(r.ade1_3s);
            entry.val_ade1_5s = Some(r.ade1_5s);
            entry.val_ade5_5s = Some(r.ade5_5s);
            entry.val_rfs = Some(r.overall_rfs);
        }
        self.log.push(entry.clone());
        Ok(entry)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.clone(),
            norm: self.model.norm.clone(),
            epoch: self.epoch,
            rng: RngState { seed: self.cfg.seed, stream: SHUFFLE_STREAM + self.epoch as u64 },
            params: self.model.params.clone(),
            adam: self.adam.clone(),
            log: self.log.clone(),
        }
    }

    /// Runs the remaining epochs up to `cfg.epochs`.
    pub fn finish(mut self) -> Result<Checkpoint, TrainError> {
        while self.epoch < self.cfg.epochs {
            self.run_epoch()?;
        }
        Ok(self.checkpoint())
    }
}

/// Trains from scratch; the result is a pure function of `(dataset, cfg)`.
pub fn train(dataset: &[Scenario], cfg: TrainConfig) -> Result<Checkpoint, TrainError> {
    Trainer::new(dataset, cfg)?.finish()
}
