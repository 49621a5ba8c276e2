use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::files::{read_text, sha256_file, write_bytes};
use crate::CliError;

pub const TOOL: &str = "trajplan";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// Everything needed to re-run one command: the resolved settings, the
/// digests of what it read and of what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new<S: Serialize>(
        command: &str,
        seed: u64,
        settings: &S,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> Result<Self, CliError> {
        Ok(Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            settings: serde_json::to_value(settings).map_err(CliError::runtime)?,
            inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_, _>>()?,
            outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_, _>>()?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        text.push('\n');
        write_bytes(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let m: Self = serde_json::from_str(&read_text(path)?).map_err(|e| CliError::input(path, e))?;
        if m.tool != TOOL {
            return Err(CliError::input(path, format!("written by {:?}, not {TOOL}", m.tool)));
        }
        Ok(m)
    }

    /// Fails with an input error if any recorded input changed since.
    pub fn verify_inputs(&self) -> Result<(), CliError> {
        for d in &self.inputs {
            let now = sha256_file(&d.path)?;
            if now != d.sha256 {
                return Err(CliError::input(&d.path, format!("digest {now} differs from recorded {}", d.sha256)));
            }
        }
        Ok(())
    }
}
