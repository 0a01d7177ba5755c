//! Unit-norm embedding store and its on-disk formats.
//!
//! Binary layout (`EMB1`, little-endian):
//!
//! ```text
//! b"EMB1" | u32 dim | u64 count | count x ( u16 id_len | id bytes | dim x f32 )
//! ```
//!
//! A JSON form `{"dim": d, "entries": {id: [floats]}}` is accepted for small
//! fixtures. JSON entries are loaded in ascending id order.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Tolerance on the L2 norm of every stored vector.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Id-indexed vectors, all of one dimension and all unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct JsonStore {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmbeddingFormat("dim must be positive".into()));
        }
        Ok(EmbeddingStore {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids in insertion order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index
            .get(id)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn get_f64(&self, id: &str) -> Option<Vec<f64>> {
        self.get(id).map(|v| v.iter().map(|&x| x as f64).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .enumerate()
            .map(move |(row, id)| (id.as_str(), &self.data[row * self.dim..(row + 1) * self.dim]))
    }

    /// Insert a vector, normalizing it to unit length.
    ///
    /// Vectors already within [`UNIT_TOLERANCE`] of unit length are stored
    /// unchanged so that re-ingesting a written store is the identity.
    pub fn insert(&mut self, id: impl Into<String>, vector: &[f64]) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if id.len() > u16::MAX as usize {
            return Err(Error::EmbeddingFormat(format!("id longer than {} bytes", u16::MAX)));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { id });
        }
        let norm = util::l2_norm(vector);
        if norm == 0.0 {
            return Err(Error::ZeroVector { id });
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId {
                id,
                first: 0,
                second: 0,
            });
        }
        let scale = if (norm - 1.0).abs() <= UNIT_TOLERANCE { 1.0 } else { 1.0 / norm };
        let row: Vec<f32> = vector.iter().map(|&x| (x * scale) as f32).collect();
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { id });
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(&row);
        Ok(())
    }

    pub fn insert_f32(&mut self, id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let v: Vec<f64> = vector.iter().map(|&x| x as f64).collect();
        self.insert(id, &v)
    }

    /// Load either format, detected from the first bytes.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
        if first == Some(&b'{') {
            Self::from_json_bytes(&bytes)
        } else {
            Self::from_emb1_bytes(&bytes)
        }
    }

    pub fn from_emb1_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4).ok_or_else(|| Error::EmbeddingFormat("magic mismatch".into()))?;
        if magic != EMB_MAGIC {
            return Err(Error::EmbeddingFormat("magic mismatch".into()));
        }
        let dim = cur
            .u32()
            .ok_or_else(|| Error::EmbeddingFormat("header truncated".into()))? as usize;
        let count = cur
            .u64()
            .ok_or_else(|| Error::EmbeddingFormat("header truncated".into()))?;
        let mut store = EmbeddingStore::new(dim)?;
        let mut row = vec![0f64; dim];
        for n in 0..count {
            let truncated = Error::Truncated {
                expected: count,
                found: n,
            };
            let Some(id_len) = cur.u16() else { return Err(truncated) };
            let Some(id_bytes) = cur.take(id_len as usize) else { return Err(truncated) };
            let id = std::str::from_utf8(id_bytes)
                .map_err(|_| Error::EmbeddingFormat(format!("entry {n}: id is not UTF-8")))?
                .to_string();
            let Some(raw) = cur.take(dim * 4) else { return Err(truncated) };
            for (slot, chunk) in row.iter_mut().zip(raw.chunks_exact(4)) {
                *slot = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
            }
            store.insert(id, &row).map_err(|e| match e {
                Error::DuplicateId { id, .. } => Error::DuplicateId {
                    id,
                    first: 0,
                    second: n as usize,
                },
                other => other,
            })?;
        }
        if cur.pos != bytes.len() {
            return Err(Error::EmbeddingFormat(format!(
                "{} trailing bytes after {count} entries",
                bytes.len() - cur.pos
            )));
        }
        Ok(store)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let parsed: JsonStore = serde_json::from_slice(bytes)?;
        let mut store = EmbeddingStore::new(parsed.dim)?;
        for (id, v) in parsed.entries {
            store.insert(id, &v)?;
        }
        Ok(store)
    }

    pub fn to_emb1_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4 + self.ids.len() * 18);
        out.extend_from_slice(EMB_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (id, v) in self.iter() {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let entries = self
            .iter()
            .map(|(id, v)| (id.to_string(), v.iter().map(|&x| x as f64).collect()))
            .collect();
        Ok(serde_json::to_vec(&JsonStore {
            dim: self.dim,
            entries,
        })?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, &self.to_emb1_bytes())
    }
}

/// Convenience wrapper matching the CLI verb.
pub fn ingest_embeddings(path: &Path) -> Result<EmbeddingStore> {
    EmbeddingStore::read(path)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }
    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes(b.try_into().unwrap()))
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}
