use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajplan_metrics::evaluate;
use trajplan_training::{EpochLog, LOG_HEADER};

use super::{metrics_table, AblationReport, Step};
use crate::files::{read_checkpoint, read_scenario_file, read_text, write_bytes};
use crate::svg::{bev_plot, line_chart};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportStep {
    pub scenarios: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Training log CSV.
    pub log: Option<PathBuf>,
    /// `ablation.json` from the ablate command.
    pub ablation: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Number of bird's-eye plots.
    pub plots: usize,
}

pub fn parse_log_csv(path: &Path) -> Result<Vec<EpochLog>, CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(CliError::input(path, "not a training log (unexpected header)"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |what: &str| CliError::input(path, format!("line {}: {what}", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let opt = |s: &str| -> Result<Option<f64>, CliError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad("bad number"))
            }
        };
        out.push(EpochLog {
            epoch: f[0].parse().map_err(|_| bad("bad epoch"))?,
            train_loss: f[1].parse().map_err(|_| bad("bad loss"))?,
            val_ade1_3s: opt(f[2])?,
            val_ade1_5s: opt(f[3])?,
            val_ade5_5s: opt(f[4])?,
            val_rfs: opt(f[5])?,
        });
    }
    Ok(out)
}

impl Step for ReportStep {
    const NAME: &'static str = "report";

    fn seed(&self) -> u64 {
        0
    }

    fn inputs(&self) -> Vec<PathBuf> {
        [&self.scenarios, &self.checkpoint, &self.log, &self.ablation].into_iter().flatten().cloned().collect()
    }

    fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifest.json")
    }

    fn reroot(&mut self, dir: &Path) {
        self.out_dir = dir.to_path_buf();
    }

    fn execute(&self) -> Result<Vec<PathBuf>, CliError> {
        if self.inputs().is_empty() {
            return Err(CliError::Usage("report needs --log, --ablation, or --scenarios with --checkpoint".into()));
        }
        let mut outputs = Vec::new();
        let mut tables = String::new();
        let emit = |name: &str, body: &str, outputs: &mut Vec<PathBuf>| -> Result<(), CliError> {
            let p = self.out_dir.join(name);
            write_bytes(&p, body.as_bytes())?;
            outputs.push(p);
            Ok(())
        };

        if let Some(log_path) = &self.log {
            let log = parse_log_csv(log_path)?;
            let x = |e: &EpochLog| e.epoch as f64;
            let loss = vec![("train loss".to_string(), log.iter().map(|e| [x(e), e.train_loss]).collect())];
            emit("loss_curve.svg", &line_chart("Training loss", "epoch", "loss", &loss), &mut outputs)?;
            let series: Vec<(String, Vec<[f64; 2]>)> = [
                ("val ADE@3s", log.iter().filter_map(|e| e.val_ade1_3s.map(|v| [x(e), v])).collect::<Vec<_>>()),
                ("val ADE@5s", log.iter().filter_map(|e| e.val_ade1_5s.map(|v| [x(e), v])).collect()),
                ("val top5 ADE@5s", log.iter().filter_map(|e| e.val_ade5_5s.map(|v| [x(e), v])).collect()),
            ]
            .into_iter()
            .filter(|s| !s.1.is_empty())
            .map(|(n, v)| (n.to_string(), v))
            .collect();
            if !series.is_empty() {
                emit("val_ade.svg", &line_chart("Validation ADE", "epoch", "meters", &series), &mut outputs)?;
            }
        }

        match (&self.scenarios, &self.checkpoint) {
            (Some(sp), Some(cp)) => {
                let ck = read_checkpoint(cp)?;
                let data = ck.config.ablation.apply(&read_scenario_file(sp)?);
                let model = ck.model().map_err(|e| CliError::input(cp, e))?;
                let preds = model.predict(&data).map_err(|e| CliError::input(sp, e))?;
                let metrics = evaluate(&preds, &data).map_err(|e| CliError::input(sp, e))?;
                tables.push_str("metrics\n");
                tables.push_str(&metrics_table(&metrics));
                for (i, (s, p)) in data.iter().zip(&preds).take(self.plots).enumerate() {
                    emit(&format!("bev_{i:03}.svg"), &bev_plot(s, p), &mut outputs)?;
                }
            }
            (None, None) => {}
            _ => return Err(CliError::Usage("--scenarios and --checkpoint go together".into())),
        }

        if let Some(ap) = &self.ablation {
            let report: AblationReport = serde_json::from_str(&read_text(ap)?).map_err(|e| CliError::input(ap, e))?;
            if !tables.is_empty() {
                tables.push('\n');
            }
            tables.push_str("ablation\n");
            tables.push_str(&report.table());
        }
        if !tables.is_empty() {
            print!("{tables}");
            emit("tables.txt", &tables, &mut outputs)?;
        }
        Ok(outputs)
    }
}
