//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! "CSRM"            4 bytes
//! version           u16
//! config length     u32, then the architecture as JSON
//! config hash       32 bytes, SHA-256 of the JSON
//! parameter count   u32, then that many f32 in canonical order
//! optimizer flag    u8; when 1: step u64, then m and v as f32 arrays
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::arch::ArchConfig;
use super::params::{count_params, ModelParams};
use crate::error::{Error, Result};
use crate::train::AdamState;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CSRM";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub optimizer: Option<AdamState>,
}

/// Hex SHA-256 of the architecture's JSON form.
pub fn config_hash(config: &ArchConfig) -> String {
    hex(&Sha256::digest(config_json(config)))
}

fn config_json(config: &ArchConfig) -> Vec<u8> {
    serde_json::to_vec(config).expect("plain struct serializes")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn put_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let json = config_json(&ckpt.params.config);
    let flat = ckpt.params.flatten();
    let mut out = Vec::with_capacity(64 + json.len() + 12 * flat.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&Sha256::digest(&json));
    out.extend_from_slice(&(flat.len() as u32).to_le_bytes());
    put_f32s(&mut out, &flat);
    match &ckpt.optimizer {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&s.step.to_le_bytes());
            put_f32s(&mut out, &s.m);
            put_f32s(&mut out, &s.v);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Parse(format!("checkpoint truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Parse("length overflow".into()))?, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Parse("not a checkpoint file".into()));
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version as u32,
            expected: CHECKPOINT_VERSION as u32,
        });
    }
    let json_len = r.u32("config length")? as usize;
    let json = r.take(json_len, "config")?;
    let hash = r.take(32, "config hash")?;
    if Sha256::digest(json).as_slice() != hash {
        return Err(Error::Parse("checkpoint config hash does not match its config".into()));
    }
    let config: ArchConfig = serde_json::from_slice(json).map_err(|e| Error::Parse(format!("checkpoint config: {e}")))?;
    let mut params = ModelParams::zeros(&config)?;
    let n = r.u32("parameter count")? as usize;
    if n != count_params(&params) {
        return Err(Error::Parse(format!(
            "checkpoint stores {n} parameters, its config needs {}",
            count_params(&params)
        )));
    }
    params.load_flat(&r.f32s(n, "parameters")?)?;
    let optimizer = match r.take(1, "optimizer flag")?[0] {
        0 => None,
        1 => {
            let step = u64::from_le_bytes(r.take(8, "optimizer step")?.try_into().unwrap());
            let m = r.f32s(n, "first moments")?;
            let v = r.f32s(n, "second moments")?;
            Some(AdamState { step, m, v })
        }
        f => return Err(Error::Parse(format!("bad optimizer flag {f}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Parse("trailing bytes after checkpoint".into()));
    }
    Ok(Checkpoint { params, optimizer })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_checkpoint(&std::fs::read(path)?)
}

/// Loads a checkpoint and insists that it was written for `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ArchConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    let (found, requested) = (config_hash(&ckpt.params.config), config_hash(expected));
    if found != requested {
        return Err(Error::ConfigMismatch {
            checkpoint: found,
            requested,
        });
    }
    Ok(ckpt)
}
