use rand::Rng;

use crate::error::{Error, Result};

/// The original caption feature plus its rewrites; one member is drawn
/// uniformly per training step.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPool {
    pub original: Vec<f64>,
    pub rewrites: Vec<Vec<f64>>,
}

impl AugmentationPool {
    pub fn new(original: Vec<f64>, rewrites: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(r) = rewrites.iter().find(|r| r.len() != original.len()) {
            return Err(Error::DimMismatch {
                expected: original.len(),
                found: r.len(),
            });
        }
        Ok(AugmentationPool { original, rewrites })
    }

    pub fn original_only(original: Vec<f64>) -> Self {
        AugmentationPool {
            original,
            rewrites: Vec::new(),
        }
    }

    /// Number of members, original included.
    pub fn len(&self) -> usize {
        self.rewrites.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.original.len()
    }

    /// Member `0` is the original, `1..=n` the rewrites.
    pub fn member(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.original
        } else {
            &self.rewrites[i - 1]
        }
    }
}

/// Index of the drawn member (0 = original).
pub fn sample_index<R: Rng + ?Sized>(pool: &AugmentationPool, rng: &mut R) -> usize {
    if pool.rewrites.is_empty() {
        0
    } else {
        rng.gen_range(0..pool.len())
    }
}

pub fn sample_positive<'a, R: Rng + ?Sized>(pool: &'a AugmentationPool, rng: &mut R) -> &'a [f64] {
    pool.member(sample_index(pool, rng))
}
