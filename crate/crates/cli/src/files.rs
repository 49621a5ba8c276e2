use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use trajplan_core::{read_predictions, read_scenarios, write_scenarios, PredictionRecord, Scenario};
use trajplan_training::Checkpoint;

use crate::CliError;

pub fn read_scenario_file(path: &Path) -> Result<Vec<Scenario>, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    let s = read_scenarios(BufReader::new(f)).map_err(|e| CliError::input(path, e))?;
    if s.is_empty() {
        return Err(CliError::input(path, "no scenarios"));
    }
    Ok(s)
}

pub fn read_prediction_file(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    read_predictions(BufReader::new(f)).map_err(|e| CliError::input(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| CliError::input(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

pub fn write_scenario_file(path: &Path, scenarios: &[Scenario]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let f = fs::File::create(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    write_scenarios(BufWriter::new(f), scenarios).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `path` with `suffix` appended to its file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// `path`'s file name placed under `dir`.
pub fn reroot(path: &Path, dir: &Path) -> PathBuf {
    dir.join(path.file_name().unwrap_or(path.as_os_str()))
}
