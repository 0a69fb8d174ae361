//! Binary checkpoint format.
//!
//! ```text
//! "LCNN"                      4 bytes magic
//! version                     u32 LE
//! metadata length             u64 LE
//! metadata                    UTF-8 JSON (configs, loss_best, counters, ...)
//! per tensor, canonical order:
//!   name length               u32 LE
//!   name                      UTF-8
//!   rank                      u32 LE
//!   dims                      rank x u32 LE
//!   data                      f32 LE, row-major
//! ```
//!
//! Parameters are stored at 32-bit precision.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TrainConfig;
use crate::model::{LoadCNNConfig, LoadCNNParams};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"LCNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_config: LoadCNNConfig,
    pub train_config: TrainConfig,
    pub params: LoadCNNParams,
    /// Best validation loss; infinite if no validation ran.
    pub loss_best: f64,
    /// Step and epoch at which `params` were recorded.
    pub step: usize,
    pub epoch: usize,
    pub total_steps: usize,
    pub id_map_hash: Option<String>,
    /// Free-form pipeline settings needed to rebuild the data encoding.
    pub extra: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    model_config: LoadCNNConfig,
    train_config: TrainConfig,
    loss_best: Option<f64>,
    step: usize,
    epoch: usize,
    total_steps: usize,
    id_map_hash: Option<String>,
    #[serde(default)]
    extra: BTreeMap<String, String>,
    tensor_count: usize,
}

impl Checkpoint {
    /// The parameters as they come back from disk.
    pub fn params_f32(&self) -> LoadCNNParams {
        self.params.round_to_f32()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        let named = self.params.named_tensors();
        let meta = Metadata {
            model_config: self.model_config.clone(),
            train_config: self.train_config.clone(),
            loss_best: self.loss_best.is_finite().then_some(self.loss_best),
            step: self.step,
            epoch: self.epoch,
            total_steps: self.total_steps,
            id_map_hash: self.id_map_hash.clone(),
            extra: self.extra.clone(),
            tensor_count: named.len(),
        };
        let json = serde_json::to_vec(&meta)
            .map_err(|e| CheckpointError::Corrupt(format!("metadata encoding: {e}")))?;

        let mut out = Vec::with_capacity(16 + json.len() + self.params.count() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (name, t) in named {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion { found: version });
        }
        let meta_len = r.u64("metadata length")?;
        let meta_len = usize::try_from(meta_len)
            .map_err(|_| CheckpointError::Corrupt("metadata length overflows".into()))?;
        let meta: Metadata = serde_json::from_slice(r.take(meta_len, "metadata")?)
            .map_err(|e| CheckpointError::Corrupt(format!("metadata: {e}")))?;

        let mut params = LoadCNNParams::zeros(&meta.model_config)
            .map_err(|e| CheckpointError::Corrupt(format!("embedded config: {e}")))?;
        let expected: Vec<(String, Vec<usize>)> = params
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if meta.tensor_count != expected.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} tensors recorded, config needs {}",
                meta.tensor_count,
                expected.len()
            )));
        }
        for ((want_name, want_shape), slot) in expected.into_iter().zip(params.tensors_mut()) {
            let name_len = r.u32("tensor name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
                .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?;
            if name != want_name {
                return Err(CheckpointError::Corrupt(format!(
                    "expected tensor {want_name}, found {name}"
                )));
            }
            let rank = r.u32("rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32("dimension")? as usize);
            }
            if shape != want_shape {
                return Err(CheckpointError::Corrupt(format!(
                    "{name}: shape {shape:?} does not match embedded config {want_shape:?}"
                )));
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n * 4, "tensor data")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            *slot = Tensor::new(&shape, data)
                .map_err(|e| CheckpointError::Corrupt(format!("{name}: {e}")))?;
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            model_config: meta.model_config,
            train_config: meta.train_config,
            params,
            loss_best: meta.loss_best.unwrap_or(f64::INFINITY),
            step: meta.step,
            epoch: meta.epoch,
            total_steps: meta.total_steps,
            id_map_hash: meta.id_map_hash,
            extra: meta.extra,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Corrupt(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
