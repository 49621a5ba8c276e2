use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajplan_training::{write_log_csv, TrainConfig, Trainer};

use super::Step;
use crate::config::check_train;
use crate::files::{read_scenario_file, reroot, with_suffix, write_bytes};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainStep {
    pub scenarios: PathBuf,
    pub out: PathBuf,
    pub log: PathBuf,
    pub train: TrainConfig,
}

impl Step for TrainStep {
    const NAME: &'static str = "train";

    fn seed(&self) -> u64 {
        self.train.seed
    }

    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.scenarios.clone()]
    }

    fn manifest_path(&self) -> PathBuf {
        with_suffix(&self.out, ".manifest.json")
    }

    fn reroot(&mut self, dir: &Path) {
        self.out = reroot(&self.out, dir);
        self.log = reroot(&self.log, dir);
    }

    fn execute(&self) -> Result<Vec<PathBuf>, CliError> {
        let data = read_scenario_file(&self.scenarios)?;
        check_train(&self.train, &data, &self.scenarios)?;
        let mut t = Trainer::new(&data, self.train.clone()).map_err(CliError::runtime)?;
        eprintln!("training on {} scenarios, validating on {}", t.train.len(), t.val.len());
        while t.epoch < self.train.epochs {
            let e = t.run_epoch().map_err(CliError::runtime)?;
            match e.val_ade1_5s {
                Some(v) => eprintln!("epoch {}/{}: train_loss {:.4}, val ade1@5s {v:.4}", e.epoch, self.train.epochs, e.train_loss),
                None => eprintln!("epoch {}/{}: train_loss {:.4}", e.epoch, self.train.epochs, e.train_loss),
            }
        }
        let ckpt = t.checkpoint();
        write_bytes(&self.out, &ckpt.to_bytes().map_err(CliError::runtime)?)?;
        let mut csv = Vec::new();
        write_log_csv(&mut csv, &ckpt.log).map_err(CliError::runtime)?;
        write_bytes(&self.log, &csv)?;
        Ok(vec![self.out.clone(), self.log.clone()])
    }
}
