//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `TPCK0001`, a little-endian `u64` header length,
//! a JSON header, then every tensor's data as little-endian `f64` in index
//! order. The header carries the configs, normalizer, counters, RNG state,
//! the epoch log and a tensor index (group, name, shape, offset).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use trajplan_diffmath::{ParamStore, Tensor};
use trajplan_model::{Model, Normalizer};

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::trainer::EpochLog;
use crate::TrainError;

pub const MAGIC: &[u8; 8] = b"TPCK0001";

/// Shuffle RNG position: the next epoch draws from `stream` of `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub norm: Normalizer,
    /// Completed epochs.
    pub epoch: usize,
    pub rng: RngState,
    pub params: ParamStore,
    pub adam: AdamState,
    pub log: Vec<EpochLog>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    group: String,
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    norm: Normalizer,
    epoch: usize,
    adam_step: u64,
    rng: RngState,
    log: Vec<EpochLog>,
    tensors: Vec<TensorEntry>,
}

const GROUPS: [&str; 3] = ["param", "adam_m", "adam_v"];

impl Checkpoint {
    /// Model with the checkpoint's (ablated) config, parameters and normalizer.
    pub fn model(&self) -> Result<Model, TrainError> {
        Ok(Model::from_params(self.config.effective_model(), self.params.clone(), self.norm.clone())?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, TrainError> {
        let mut tensors = Vec::new();
        let mut data: Vec<f64> = Vec::new();
        let groups: [Vec<(&String, &Tensor)>; 3] =
            [self.params.iter().collect(), self.adam.m.iter().collect(), self.adam.v.iter().collect()];
        for (group, items) in GROUPS.iter().zip(&groups) {
            for (name, t) in items {
                tensors.push(TensorEntry {
                    group: group.to_string(),
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    offset: data.len(),
                });
                data.extend_from_slice(t.data());
            }
        }
        let header = Header {
            config: self.config.clone(),
            norm: self.norm.clone(),
            epoch: self.epoch,
            adam_step: self.adam.step,
            rng: self.rng,
            log: self.log.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).map_err(|e| TrainError::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for x in data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        let bad = |m: String| TrainError::Format(m);
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..).unwrap_or_default();
        if hlen > body.len() {
            return Err(bad(format!("header length {hlen} exceeds file")));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(format!("header: {e}")))?;
        let raw = &body[hlen..];
        if raw.len() % 8 != 0 {
            return Err(bad(format!("data section of {} bytes is not f64-aligned", raw.len())));
        }
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();

        let mut params = ParamStore::new();
        let mut m = BTreeMap::new();
        let mut v = BTreeMap::new();
        let mut expected_offset = 0;
        for e in header.tensors {
            let n: usize = e.shape.iter().product();
            if e.offset != expected_offset || e.offset + n > data.len() {
                return Err(bad(format!("tensor {}/{} at bad offset {}", e.group, e.name, e.offset)));
            }
            expected_offset += n;
            let t = Tensor::new(e.shape, data[e.offset..e.offset + n].to_vec())?;
            match e.group.as_str() {
                "param" => params.insert(e.name, t),
                "adam_m" => {
                    m.insert(e.name, t);
                }
                "adam_v" => {
                    v.insert(e.name, t);
                }
                g => return Err(bad(format!("unknown tensor group {g:?}"))),
            }
        }
        if expected_offset != data.len() {
            return Err(bad(format!("{} trailing values", data.len() - expected_offset)));
        }
        Ok(Self {
            config: header.config,
            norm: header.norm,
            epoch: header.epoch,
            rng: header.rng,
            params,
            adam: AdamState { step: header.adam_step, m, v },
            log: header.log,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
