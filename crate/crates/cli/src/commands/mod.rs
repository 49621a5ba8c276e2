mod ablate;
mod eval;
mod generate;
mod report;
mod train;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use ablate::{paired_deltas, AblateStep, AblationReport, AblationRow, PairedDelta};
pub use eval::{metrics_table, EvalStep};
pub use generate::GenerateStep;
pub use report::{parse_log_csv, ReportStep};
pub use train::TrainStep;

use crate::manifest::{FileDigest, RunManifest};
use crate::CliError;

/// One command with fully resolved settings. The settings are what the
/// manifest records and what replay deserializes.
pub trait Step: Serialize + DeserializeOwned {
    const NAME: &'static str;
    fn seed(&self) -> u64;
    fn inputs(&self) -> Vec<PathBuf>;
    fn manifest_path(&self) -> PathBuf;
    /// Moves every output under `dir`, keeping file names.
    fn reroot(&mut self, dir: &Path);
    /// Runs the command and returns the files it wrote.
    fn execute(&self) -> Result<Vec<PathBuf>, CliError>;
}

/// Executes `step` and writes its manifest next to the outputs.
pub fn run_step<S: Step>(step: &S) -> Result<RunManifest, CliError> {
    let inputs = step.inputs();
    let before: Vec<FileDigest> = inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_, _>>()?;
    let outputs = step.execute()?;
    let in_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let out_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    let m = RunManifest::new(S::NAME, step.seed(), step, &in_refs, &out_refs)?;
    if m.inputs != before {
        return Err(CliError::runtime("an input file changed while the command ran"));
    }
    m.save(&step.manifest_path())?;
    Ok(m)
}

fn replay_as<S: Step>(m: &RunManifest, out_dir: Option<&Path>) -> Result<RunManifest, CliError> {
    let mut step: S = serde_json::from_value(m.settings.clone())
        .map_err(|e| CliError::Input(format!("manifest settings for {}: {e}", S::NAME)))?;
    if let Some(d) = out_dir {
        step.reroot(d);
    }
    let fresh = run_step(&step)?;
    if fresh.outputs.len() != m.outputs.len() {
        return Err(CliError::runtime(format!(
            "replay wrote {} files, the manifest lists {}",
            fresh.outputs.len(),
            m.outputs.len()
        )));
    }
    for (new, old) in fresh.outputs.iter().zip(&m.outputs) {
        if new.sha256 != old.sha256 {
            return Err(CliError::runtime(format!(
                "replay output {} differs from recorded {} ({} vs {})",
                new.path.display(),
                old.path.display(),
                new.sha256,
                old.sha256
            )));
        }
    }
    Ok(fresh)
}

/// Re-runs the command a manifest describes, after checking its inputs are
/// unchanged, and checks every output is byte-identical to the recorded one.
pub fn replay(manifest: &Path, out_dir: Option<&Path>) -> Result<RunManifest, CliError> {
    let m = RunManifest::load(manifest)?;
    m.verify_inputs()?;
    match m.command.as_str() {
        GenerateStep::NAME => replay_as::<GenerateStep>(&m, out_dir),
        TrainStep::NAME => replay_as::<TrainStep>(&m, out_dir),
        EvalStep::NAME => replay_as::<EvalStep>(&m, out_dir),
        AblateStep::NAME => replay_as::<AblateStep>(&m, out_dir),
        ReportStep::NAME => replay_as::<ReportStep>(&m, out_dir),
        c => Err(CliError::input(manifest, format!("unknown command {c:?}"))),
    }
}
