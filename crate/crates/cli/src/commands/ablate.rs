use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajplan_metrics::{evaluate, MetricReport};
use trajplan_model::{EncoderVariant, QueryMode};
use trajplan_training::{Ablation, TrainConfig, Trainer};

use super::Step;
use crate::config::{check_train, query_name, variant_name, GridConfig};
use crate::files::{read_scenario_file, write_bytes};
use crate::table::{num, render};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblateStep {
    pub scenarios: PathBuf,
    pub out_dir: PathBuf,
    /// Base config; each cell overrides variant, query mode and ablation.
    pub train: TrainConfig,
    pub grid: GridConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: EncoderVariant,
    pub query: QueryMode,
    pub ablation: Ablation,
    pub final_train_loss: f64,
    /// Scored on the cell's validation split.
    pub metrics: MetricReport,
}

/// BlankVisual minus full, for one (variant, query) pair. `rel_*` are
/// relative to the full model's ADE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    pub variant: EncoderVariant,
    pub query: QueryMode,
    pub full_ade_3s: f64,
    pub blank_ade_3s: f64,
    pub delta_ade_3s: f64,
    pub rel_ade_3s: f64,
    pub full_ade_5s: f64,
    pub blank_ade_5s: f64,
    pub delta_ade_5s: f64,
    pub rel_ade_5s: f64,
    pub delta_rfs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub paired: Vec<PairedDelta>,
}

pub fn paired_deltas(rows: &[AblationRow]) -> Vec<PairedDelta> {
    let mut out = Vec::new();
    for full in rows.iter().filter(|r| r.ablation == Ablation::None) {
        let Some(blank) = rows
            .iter()
            .find(|r| r.ablation == Ablation::BlankVisual && r.variant == full.variant && r.query == full.query)
        else {
            continue;
        };
        let (f, b) = (&full.metrics, &blank.metrics);
        out.push(PairedDelta {
            variant: full.variant,
            query: full.query,
            full_ade_3s: f.ade1_3s,
            blank_ade_3s: b.ade1_3s,
            delta_ade_3s: b.ade1_3s - f.ade1_3s,
            rel_ade_3s: (b.ade1_3s - f.ade1_3s) / f.ade1_3s,
            full_ade_5s: f.ade1_5s,
            blank_ade_5s: b.ade1_5s,
            delta_ade_5s: b.ade1_5s - f.ade1_5s,
            rel_ade_5s: (b.ade1_5s - f.ade1_5s) / f.ade1_5s,
            delta_rfs: b.overall_rfs - f.overall_rfs,
        });
    }
    out
}

impl AblationReport {
    /// One row per grid cell (ADE, RFS overall and per category), then the
    /// paired BlankVisual deltas.
    pub fn table(&self) -> String {
        let cats: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.metrics.per_category.keys()).collect();
        let mut headers = vec!["variant", "query", "ablation", "ADE@3s", "ADE@5s", "top5 ADE@5s", "RFS"];
        let cat_headers: Vec<String> = cats.iter().map(|c| format!("RFS {c}")).collect();
        headers.extend(cat_headers.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let m = &r.metrics;
                let mut row = vec![
                    variant_name(r.variant).to_string(),
                    query_name(r.query).to_string(),
                    r.ablation.to_string(),
                    num(m.ade1_3s),
                    num(m.ade1_5s),
                    num(m.ade5_5s),
                    num(m.overall_rfs),
                ];
                row.extend(cats.iter().map(|c| m.per_category.get(*c).map_or(String::new(), |x| num(*x))));
                row
            })
            .collect();
        let mut out = render(&headers, &rows);
        if !self.paired.is_empty() {
            out.push_str("\nblank_visual minus full\n");
            let rows: Vec<Vec<String>> = self
                .paired
                .iter()
                .map(|d| {
                    vec![
                        variant_name(d.variant).to_string(),
                        query_name(d.query).to_string(),
                        format!("{:+.4}", d.delta_ade_3s),
                        format!("{:+.1}%", 100.0 * d.rel_ade_3s),
                        format!("{:+.4}", d.delta_ade_5s),
                        format!("{:+.1}%", 100.0 * d.rel_ade_5s),
                        format!("{:+.4}", d.delta_rfs),
                    ]
                })
                .collect();
            out.push_str(&render(&["variant", "query", "dADE@3s", "rel@3s", "dADE@5s", "rel@5s", "dRFS"], &rows));
        }
        out
    }
}

impl AblateStep {
    pub fn json_path(&self) -> PathBuf {
        self.out_dir.join("ablation.json")
    }

    pub fn table_path(&self) -> PathBuf {
        self.out_dir.join("ablation.txt")
    }

    /// Trains and scores every cell of the grid.
    pub fn run_grid(&self) -> Result<AblationReport, CliError> {
        let g = &self.grid;
        if g.variants.is_empty() || g.ablations.is_empty() || g.queries.is_empty() {
            return Err(CliError::Usage("every grid axis needs at least one value".into()));
        }
        let data = read_scenario_file(&self.scenarios)?;
        let cells = g.variants.len() * g.queries.len() * g.ablations.len();
        let mut rows = Vec::with_capacity(cells);
        for &variant in &g.variants {
            for &query in &g.queries {
                for &ablation in &g.ablations {
                    let mut cfg = self.train.clone();
                    cfg.model.encoder.variant = variant;
                    cfg.model.decoder.query_mode = query;
                    cfg.ablation = ablation;
                    check_train(&cfg, &data, &self.scenarios)?;
                    eprintln!(
                        "[{}/{cells}] {} {} {ablation}",
                        rows.len() + 1,
                        variant_name(variant),
                        query_name(query)
                    );
                    let mut t = Trainer::new(&data, cfg.clone()).map_err(CliError::runtime)?;
                    if t.val.is_empty() {
                        return Err(CliError::Usage("validation split is empty; use more scenarios".into()));
                    }
                    let mut loss = f64::NAN;
                    while t.epoch < cfg.epochs {
                        loss = t.run_epoch().map_err(CliError::runtime)?.train_loss;
                    }
                    let preds = t.model.predict(&t.val).map_err(CliError::runtime)?;
                    let metrics = evaluate(&preds, &t.val).map_err(CliError::runtime)?;
                    rows.push(AblationRow { variant, query, ablation, final_train_loss: loss, metrics });
                }
            }
        }
        let paired = paired_deltas(&rows);
        Ok(AblationReport { rows, paired })
    }
}

impl Step for AblateStep {
    const NAME: &'static str = "ablate";

    fn seed(&self) -> u64 {
        self.train.seed
    }

    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.scenarios.clone()]
    }

    fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifest.json")
    }

    fn reroot(&mut self, dir: &Path) {
        self.out_dir = dir.to_path_buf();
    }

    fn execute(&self) -> Result<Vec<PathBuf>, CliError> {
        let report = self.run_grid()?;
        let mut json = serde_json::to_string_pretty(&report).map_err(CliError::runtime)?;
        json.push('\n');
        write_bytes(&self.json_path(), json.as_bytes())?;
        let table = report.table();
        write_bytes(&self.table_path(), table.as_bytes())?;
        print!("{table}");
        Ok(vec![self.json_path(), self.table_path()])
    }
}
