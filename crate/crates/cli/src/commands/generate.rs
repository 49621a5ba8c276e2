use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajplan_scenariogen::{generate, GenConfig};

use super::Step;
use crate::files::{reroot, with_suffix, write_scenario_file};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateStep {
    pub gen: GenConfig,
    pub out: PathBuf,
}

impl Step for GenerateStep {
    const NAME: &'static str = "generate";

    fn seed(&self) -> u64 {
        self.gen.seed
    }

    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }

    fn manifest_path(&self) -> PathBuf {
        with_suffix(&self.out, ".manifest.json")
    }

    fn reroot(&mut self, dir: &Path) {
        self.out = reroot(&self.out, dir);
    }

    fn execute(&self) -> Result<Vec<PathBuf>, CliError> {
        let scenarios = generate(&self.gen).map_err(|e| CliError::Usage(e.to_string()))?;
        write_scenario_file(&self.out, &scenarios)?;
        eprintln!("wrote {} scenarios to {}", scenarios.len(), self.out.display());
        Ok(vec![self.out.clone()])
    }
}
