use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Reference / train / eval partition of image ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub reference_ids: Vec<String>,
    pub train_ids: Vec<String>,
    pub eval_ids: Vec<String>,
}

impl CorpusSplit {
    /// Fails when any id appears in more than one part.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.reference_ids.iter().chain(&self.train_ids).chain(&self.eval_ids) {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("image {id:?} is in more than one split")));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let split: CorpusSplit = serde_json::from_slice(&bytes)?;
        split.validate()?;
        Ok(split)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        util::write_atomic(path, &bytes)
    }
}

/// Shuffle ids under `seed` and cut them into reference, train and eval.
///
/// Sizes are `floor(fraction * total)` for reference and train; the remainder
/// goes to eval. Input order does not matter: ids are sorted before shuffling.
pub fn make_split(image_ids: &[String], ref_fraction: f64, train_fraction: f64, seed: u64) -> Result<CorpusSplit> {
    let valid = |f: f64| f.is_finite() && f > 0.0;
    if !valid(ref_fraction) || !valid(train_fraction) || ref_fraction + train_fraction > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "fractions must be positive with sum <= 1 (got {ref_fraction} + {train_fraction})"
        )));
    }
    let unique: BTreeSet<&String> = image_ids.iter().collect();
    if unique.len() != image_ids.len() {
        return Err(Error::InvalidArgument("duplicate image ids".into()));
    }
    if unique.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 images to split, got {}",
            unique.len()
        )));
    }
    let mut ids: Vec<String> = unique.into_iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let total = ids.len() as f64;
    let n_ref = (ref_fraction * total).floor() as usize;
    let n_train = (train_fraction * total).floor() as usize;
    let eval_ids = ids.split_off(n_ref + n_train);
    let train_ids = ids.split_off(n_ref);
    Ok(CorpusSplit {
        reference_ids: ids,
        train_ids,
        eval_ids,
    })
}
