//! Exact cosine nearest-neighbor search over image embeddings and guidance
//! example selection from the reference set.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionRecord, EmbeddingStore};
use crate::error::{Error, Result};
use crate::util;

/// Brute-force index. Rows keep insertion order, which also breaks ties.
#[derive(Debug, Clone)]
pub struct NnIndex {
    dim: usize,
    ids: Vec<String>,
    rows: HashMap<String, usize>,
    matrix: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub image_id: String,
    pub similarity: f64,
}

impl NnIndex {
    /// Index exactly `ids`, in the given order.
    pub fn build<S: AsRef<str>>(store: &EmbeddingStore, ids: &[S]) -> Result<Self> {
        let dim = store.dim();
        let mut index = NnIndex {
            dim,
            ids: Vec::with_capacity(ids.len()),
            rows: HashMap::with_capacity(ids.len()),
            matrix: Vec::with_capacity(ids.len() * dim),
        };
        for id in ids {
            let id = id.as_ref();
            let v = store.get(id).ok_or_else(|| Error::MissingId(id.to_string()))?;
            if index.rows.insert(id.to_string(), index.ids.len()).is_some() {
                return Err(Error::InvalidArgument(format!("id {id:?} listed twice")));
            }
            index.ids.push(id.to_string());
            index.matrix.extend(v.iter().map(|&x| x as f64));
        }
        Ok(index)
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

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.rows.contains_key(id)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    /// Top-`k` rows by cosine similarity, descending; equal similarities keep
    /// row order.
    pub fn query(&self, vector: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} outside 1..={} (index size)",
                self.len()
            )));
        }
        // Adding 0.0 turns -0.0 into 0.0, so signed zeros tie under total_cmp.
        let sims: Vec<f64> = (0..self.len()).map(|i| util::dot(self.row(i), vector) + 0.0).collect();
        let mut order: Vec<usize> = (0..self.len()).collect();
        // Stable sort keeps ascending row order among equal similarities.
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]));
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| Neighbor {
                image_id: self.ids[i].clone(),
                similarity: sims[i],
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefSelConfig {
    /// Neighbor rank to use; 1 is the nearest.
    pub k: usize,
    pub seed: u64,
}

impl Default for RefSelConfig {
    fn default() -> Self {
        RefSelConfig { k: 1, seed: 42 }
    }
}

/// One input/output caption pair from a reference image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceExample {
    pub reference_image_id: String,
    pub input_caption: CaptionRecord,
    pub output_caption: CaptionRecord,
    pub similarity: f64,
}

/// Flat export form of a guidance selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceAssignment {
    pub train_image_id: String,
    pub reference_image_id: String,
    pub similarity: f64,
    pub input_caption_id: String,
    pub output_caption_id: String,
}

/// Picks guidance examples for training images from an indexed reference set.
pub struct GuidanceSelector<'a> {
    index: &'a NnIndex,
    src: HashMap<&'a str, Vec<&'a CaptionRecord>>,
    tgt: HashMap<&'a str, Vec<&'a CaptionRecord>>,
    config: RefSelConfig,
}

impl<'a> GuidanceSelector<'a> {
    pub fn new(
        index: &'a NnIndex,
        captions_src: &'a [CaptionRecord],
        captions_tgt: &'a [CaptionRecord],
        config: RefSelConfig,
    ) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::InvalidArgument("refsel k must be >= 1".into()));
        }
        let keep = |caps: &'a [CaptionRecord]| {
            let mut m: HashMap<&'a str, Vec<&'a CaptionRecord>> = HashMap::new();
            for c in caps.iter().filter(|c| index.contains(&c.image_id)) {
                m.entry(c.image_id.as_str()).or_default().push(c);
            }
            m
        };
        Ok(GuidanceSelector {
            index,
            src: keep(captions_src),
            tgt: keep(captions_tgt),
            config,
        })
    }

    pub fn select(&self, train_image_id: &str, train_vector: &[f64]) -> Result<GuidanceExample> {
        if self.index.contains(train_image_id) {
            return Err(Error::QueryInReferenceSet(train_image_id.to_string()));
        }
        let neighbors = self.index.query(train_vector, self.config.k)?;
        let chosen = neighbors.last().expect("k >= 1");
        let rid = chosen.image_id.as_str();
        let src = self.src.get(rid).filter(|v| !v.is_empty()).ok_or_else(|| Error::MissingCaption {
            image_id: rid.to_string(),
            which: "source-language",
        })?;
        let tgt = self.tgt.get(rid).filter(|v| !v.is_empty()).ok_or_else(|| Error::MissingCaption {
            image_id: rid.to_string(),
            which: "target-language",
        })?;
        let mut rng = util::rng_for(self.config.seed, &format!("guidance/{train_image_id}"));
        let input = src[rng.gen_range(0..src.len())];
        let output = tgt[rng.gen_range(0..tgt.len())];
        Ok(GuidanceExample {
            reference_image_id: rid.to_string(),
            input_caption: input.clone(),
            output_caption: output.clone(),
            similarity: chosen.similarity,
        })
    }
}

impl GuidanceExample {
    pub fn assignment(&self, train_image_id: &str) -> GuidanceAssignment {
        GuidanceAssignment {
            train_image_id: train_image_id.to_string(),
            reference_image_id: self.reference_image_id.clone(),
            similarity: self.similarity,
            input_caption_id: self.input_caption.caption_id.clone(),
            output_caption_id: self.output_caption.caption_id.clone(),
        }
    }
}

/// Rebuild guidance examples from exported assignments, keyed by train image.
pub fn resolve_assignments(
    assignments: &[GuidanceAssignment],
    captions_src: &[CaptionRecord],
    captions_tgt: &[CaptionRecord],
) -> Result<HashMap<String, GuidanceExample>> {
    let src: HashMap<&str, &CaptionRecord> = captions_src.iter().map(|c| (c.caption_id.as_str(), c)).collect();
    let tgt: HashMap<&str, &CaptionRecord> = captions_tgt.iter().map(|c| (c.caption_id.as_str(), c)).collect();
    let mut out = HashMap::with_capacity(assignments.len());
    for a in assignments {
        let input = src
            .get(a.input_caption_id.as_str())
            .ok_or_else(|| Error::MissingId(a.input_caption_id.clone()))?;
        let output = tgt
            .get(a.output_caption_id.as_str())
            .ok_or_else(|| Error::MissingId(a.output_caption_id.clone()))?;
        out.insert(
            a.train_image_id.clone(),
            GuidanceExample {
                reference_image_id: a.reference_image_id.clone(),
                input_caption: (*input).clone(),
                output_caption: (*output).clone(),
                similarity: a.similarity,
            },
        );
    }
    Ok(out)
}

pub fn write_assignments(path: &Path, assignments: &[GuidanceAssignment]) -> Result<()> {
    util::write_atomic(path, &util::to_jsonl(assignments)?)
}

pub fn read_assignments(path: &Path) -> Result<Vec<GuidanceAssignment>> {
    Ok(util::read_jsonl(path)?.into_iter().map(|(_, a)| a).collect())
}
