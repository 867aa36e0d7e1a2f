//! Binary parameter files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `LCDN` |
//! | 4 | format version (u32) |
//! | 32 | config fingerprint (SHA-256) |
//! | 4 | tensor count (u32) |
//!
//! followed by one record per tensor: name length (u32), UTF-8 name, dtype
//! tag (u8, 0 = f32), rank (u8), one u32 per extent, then the values as
//! little-endian f32.

use std::fs;
use std::path::Path;

use lungcnn::layers::{ModelParams, ModelSpec};
use lungcnn::tensor::Tensor;
use thiserror::Error;

use crate::error::CliError;

pub const MAGIC: [u8; 4] = *b"LCDN";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("bad magic {0:02x?}, not a checkpoint")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {found} (this build reads version {VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("truncated at byte offset {offset}: needed {needed} more byte(s)")]
    Truncated { offset: usize, needed: usize },
    #[error("malformed record at byte offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("{0} trailing byte(s) after the last record")]
    Trailing(usize),
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Integrity(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: [u8; 32],
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams<f32>, fingerprint: [u8; 32]) -> Self {
        let tensors = params
            .names()
            .into_iter()
            .zip(params.tensors())
            .map(|(n, t)| (n, t.clone()))
            .collect();
        Checkpoint { fingerprint, tensors }
    }

    /// Rebuilds model parameters, checking names and order against `spec`.
    pub fn into_params(self, spec: &ModelSpec) -> Result<ModelParams<f32>, CliError> {
        let want = ModelParams::<f32>::zeros(spec)?.names();
        let names: Vec<&str> = self.tensors.iter().map(|(n, _)| n.as_str()).collect();
        if names != want.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(CliError::Integrity(format!(
                "checkpoint holds tensors {names:?}, model expects {want:?}"
            )));
        }
        ModelParams::from_tensors(spec, self.tensors.into_iter().map(|(_, t)| t).collect())
            .map_err(|e| CliError::Integrity(format!("checkpoint does not fit the model: {e}")))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic(magic));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion { found: version });
        }
        let fingerprint: [u8; 32] = r.take(32)?.try_into().unwrap();
        let count = r.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let at = r.pos;
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.malformed(at, "tensor name is not UTF-8"))?
                .to_string();
            let dtype = r.u8()?;
            if dtype != DTYPE_F32 {
                return Err(r.malformed(at, &format!("unknown dtype tag {dtype}")));
            }
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| r.malformed(at, "tensor size overflows"))?;
            let data = r
                .take(n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::from_vec(&shape, data).map_err(|e| r.malformed(at, &format!("tensor `{name}`: {e}")))?;
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Trailing(bytes.len() - r.pos));
        }
        Ok(Checkpoint { fingerprint, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let tmp = path.with_extension("ckpt.tmp");
        fs::write(&tmp, self.encode()).map_err(CliError::io(&tmp))?;
        fs::rename(&tmp, path).map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(CliError::io(path))?;
        Checkpoint::decode(&bytes).map_err(|e| CliError::Integrity(format!("{}: {e}", path.display())))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let left = self.bytes.len() - self.pos;
        if n > left {
            return Err(CheckpointError::Truncated {
                offset: self.bytes.len(),
                needed: n - left,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn malformed(&self, offset: usize, reason: &str) -> CheckpointError {
        CheckpointError::Malformed {
            offset,
            reason: reason.into(),
        }
    }
}
