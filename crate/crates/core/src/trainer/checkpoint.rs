//! `XRC1` checkpoint files.
//!
//! Layout (little-endian): magic `XRC1`, u32 d_text, u32 d_joint, u64 seed,
//! 32-byte config hash, d_text*d_joint f64 weights (row-major), d_joint f64
//! bias, then a SHA-256 of everything before it.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::util;

use super::head::ProjectionHead;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"XRC1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub head: ProjectionHead,
    pub seed: u64,
    pub config_hash: [u8; 32],
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.head;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (h.weight().len() + h.bias().len()) + 32);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(h.d_text() as u32).to_le_bytes());
        out.extend_from_slice(&(h.d_joint() as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        for x in h.weight().iter().chain(h.bias()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + 32 {
            return Err(Error::Checkpoint(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let d_text = u32_at(4);
        let d_joint = u32_at(8);
        let seed = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let config_hash: [u8; 32] = bytes[20..52].try_into().expect("32 bytes");
        let n_params = d_text
            .checked_mul(d_joint)
            .and_then(|w| w.checked_add(d_joint))
            .ok_or_else(|| Error::Checkpoint("dimension overflow".into()))?;
        let expected = HEADER_LEN + 8 * n_params + 32;
        if bytes.len() != expected {
            return Err(Error::Checkpoint(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let body = &bytes[..expected - 32];
        if Sha256::digest(body).as_slice() != &bytes[expected - 32..] {
            return Err(Error::Checkpoint("digest mismatch (corrupt file)".into()));
        }
        let params: Vec<f64> = body[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let (w, b) = params.split_at(d_text * d_joint);
        let head = ProjectionHead::from_parts(d_text, d_joint, w.to_vec(), b.to_vec())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Checkpoint {
            head,
            seed,
            config_hash,
        })
    }

    /// Error naming both shapes unless the head is `d_text x d_joint`.
    pub fn expect_dims(&self, d_text: usize, d_joint: usize) -> Result<()> {
        let found = (self.head.d_text(), self.head.d_joint());
        if found != (d_text, d_joint) {
            return Err(Error::Checkpoint(format!(
                "expected dims {d_text}x{d_joint}, found {}x{}",
                found.0, found.1
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    util::write_atomic(path, &checkpoint.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
