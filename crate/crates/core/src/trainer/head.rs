use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Affine map from text features into the image embedding space, followed by
/// unit normalization. `weight` is row-major `d_text x d_joint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    d_text: usize,
    d_joint: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

/// Pre-normalization output plus its norm, kept for backprop.
#[derive(Debug, Clone)]
pub struct Projection {
    pub unit: Vec<f64>,
    pub norm: f64,
}

impl ProjectionHead {
    pub fn from_parts(d_text: usize, d_joint: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if d_text == 0 || d_joint == 0 {
            return Err(Error::InvalidArgument("head dimensions must be positive".into()));
        }
        if weight.len() != d_text * d_joint {
            return Err(Error::DimMismatch {
                expected: d_text * d_joint,
                found: weight.len(),
            });
        }
        if bias.len() != d_joint {
            return Err(Error::DimMismatch {
                expected: d_joint,
                found: bias.len(),
            });
        }
        if weight.iter().chain(&bias).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { id: "head".into() });
        }
        Ok(ProjectionHead {
            d_text,
            d_joint,
            weight,
            bias,
        })
    }

    pub fn identity(d_text: usize, d_joint: usize) -> Self {
        let mut weight = vec![0.0; d_text * d_joint];
        for i in 0..d_text.min(d_joint) {
            weight[i * d_joint + i] = 1.0;
        }
        ProjectionHead {
            d_text,
            d_joint,
            weight,
            bias: vec![0.0; d_joint],
        }
    }

    /// Identity (padded or truncated) plus uniform noise in [-0.01, 0.01]; zero bias.
    pub fn init(d_text: usize, d_joint: usize, seed: u64) -> Self {
        let mut head = Self::identity(d_text, d_joint);
        let mut rng = util::rng_for(seed, "head/init");
        for w in &mut head.weight {
            *w += rng.gen_range(-0.01..=0.01);
        }
        head
    }

    pub fn d_text(&self) -> usize {
        self.d_text
    }

    pub fn d_joint(&self) -> usize {
        self.d_joint
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weight, &mut self.bias)
    }

    /// `weight^T x + bias`, before normalization.
    pub fn affine(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != self.d_text {
            return Err(Error::DimMismatch {
                expected: self.d_text,
                found: feature.len(),
            });
        }
        let mut z = self.bias.clone();
        for (x, row) in feature.iter().zip(self.weight.chunks_exact(self.d_joint)) {
            for (zj, w) in z.iter_mut().zip(row) {
                *zj += x * w;
            }
        }
        Ok(z)
    }

    pub fn forward(&self, feature: &[f64]) -> Result<Projection> {
        let mut z = self.affine(feature)?;
        let norm = util::l2_norm(&z);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector { id: "projection".into() });
        }
        z.iter_mut().for_each(|v| *v /= norm);
        Ok(Projection { unit: z, norm })
    }

    pub fn project(&self, feature: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(feature)?.unit)
    }
}

/// Gradients of a scalar loss with respect to head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HeadGrad {
    pub fn zeros(head: &ProjectionHead) -> Self {
        HeadGrad {
            weight: vec![0.0; head.weight.len()],
            bias: vec![0.0; head.bias.len()],
        }
    }

    /// Accumulate the contribution of one sample given `dL/du` for its
    /// normalized output `u = z / |z|`.
    pub fn accumulate(&mut self, feature: &[f64], proj: &Projection, grad_unit: &[f64]) {
        let d_joint = self.bias.len();
        let radial = util::dot(&proj.unit, grad_unit);
        let gz: Vec<f64> = grad_unit
            .iter()
            .zip(&proj.unit)
            .map(|(g, u)| (g - u * radial) / proj.norm)
            .collect();
        for (b, g) in self.bias.iter_mut().zip(&gz) {
            *b += g;
        }
        for (x, row) in feature.iter().zip(self.weight.chunks_exact_mut(d_joint)) {
            for (w, g) in row.iter_mut().zip(&gz) {
                *w += x * g;
            }
        }
    }
}
