use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajplan_core::{write_predictions, PredictionRecord, PredictionSet, Scenario};
use trajplan_metrics::{evaluate, MetricReport};
use trajplan_training::{split_dataset, Checkpoint};

use super::Step;
use crate::files::{read_checkpoint, read_prediction_file, read_scenario_file, reroot, with_suffix, write_bytes};
use crate::table::{num, render};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStep {
    pub scenarios: PathBuf,
    /// Predict with this checkpoint...
    pub checkpoint: Option<PathBuf>,
    /// ...or score these stored predictions.
    pub predictions: Option<PathBuf>,
    /// Score only the checkpoint's validation split.
    pub val_only: bool,
    pub out: PathBuf,
    pub write_predictions: Option<PathBuf>,
}

impl EvalStep {
    pub fn table_path(&self) -> PathBuf {
        self.out.with_extension("txt")
    }

    fn predict(&self, data: Vec<Scenario>) -> Result<(Vec<Scenario>, Vec<PredictionSet>), CliError> {
        match (&self.checkpoint, &self.predictions) {
            (Some(path), None) => {
                let ck: Checkpoint = read_checkpoint(path)?;
                let data = ck.config.ablation.apply(&data);
                let data = if self.val_only {
                    split_dataset(&data, ck.config.train_ratio, ck.config.seed).map_err(CliError::runtime)?.1
                } else {
                    data
                };
                let model = ck.model().map_err(|e| CliError::input(path, e))?;
                let preds = model.predict(&data).map_err(|e| CliError::input(&self.scenarios, e))?;
                Ok((data, preds))
            }
            (None, Some(path)) => {
                if self.val_only {
                    return Err(CliError::Usage("--val-only needs --checkpoint".into()));
                }
                let records = read_prediction_file(path)?;
                let by_id: HashMap<&str, &PredictionRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
                let preds = data
                    .iter()
                    .map(|s| {
                        let r = by_id.get(s.id.as_str()).ok_or_else(|| CliError::input(path, format!("no prediction for {}", s.id)))?;
                        r.to_prediction_set().map_err(|e| CliError::input(path, e))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((data, preds))
            }
            _ => Err(CliError::Usage("eval needs exactly one of --checkpoint and --predictions".into())),
        }
    }
}

impl Step for EvalStep {
    const NAME: &'static str = "eval";

    fn seed(&self) -> u64 {
        0
    }

    fn inputs(&self) -> Vec<PathBuf> {
        std::iter::once(self.scenarios.clone()).chain(self.checkpoint.clone()).chain(self.predictions.clone()).collect()
    }

    fn manifest_path(&self) -> PathBuf {
        with_suffix(&self.out, ".manifest.json")
    }

    fn reroot(&mut self, dir: &Path) {
        self.out = reroot(&self.out, dir);
        self.write_predictions = self.write_predictions.as_ref().map(|p| reroot(p, dir));
    }

    fn execute(&self) -> Result<Vec<PathBuf>, CliError> {
        let data = read_scenario_file(&self.scenarios)?;
        let (data, preds) = self.predict(data)?;
        let report = evaluate(&preds, &data).map_err(|e| CliError::input(&self.scenarios, e))?;
        let mut json = serde_json::to_string_pretty(&report).map_err(CliError::runtime)?;
        json.push('\n');
        write_bytes(&self.out, json.as_bytes())?;
        let table = metrics_table(&report);
        write_bytes(&self.table_path(), table.as_bytes())?;
        print!("{table}");
        let mut outputs = vec![self.out.clone(), self.table_path()];
        if let Some(p) = &self.write_predictions {
            let records: Vec<PredictionRecord> =
                data.iter().zip(&preds).map(|(s, p)| PredictionRecord::new(s.id.clone(), p)).collect();
            let mut buf = Vec::new();
            write_predictions(&mut buf, &records).map_err(CliError::runtime)?;
            write_bytes(p, &buf)?;
            outputs.push(p.clone());
        }
        Ok(outputs)
    }
}

/// Overall ADE/RFS table followed by a per-category table.
pub fn metrics_table(r: &MetricReport) -> String {
    let mut out = render(
        &["n", "ADE@3s", "ADE@5s", "top5 ADE@3s", "top5 ADE@5s", "top10 ADE@3s", "top10 ADE@5s", "RFS", "RFS@3s", "RFS@5s"],
        &[vec![
            r.n.to_string(),
            num(r.ade1_3s),
            num(r.ade1_5s),
            num(r.ade5_3s),
            num(r.ade5_5s),
            num(r.ade10_3s),
            num(r.ade10_5s),
            num(r.overall_rfs),
            num(r.rfs_3s),
            num(r.rfs_5s),
        ]],
    );
    out.push('\n');
    let rows: Vec<Vec<String>> = r
        .per_category
        .iter()
        .map(|(c, rfs)| vec![c.clone(), num(*rfs), r.per_category_ade.get(c).map_or(String::new(), |a| num(*a))])
        .collect();
    out.push_str(&render(&["category", "RFS", "ADE@5s"], &rows));
    out
}
