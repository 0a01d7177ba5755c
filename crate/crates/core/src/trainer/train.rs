use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

use super::head::{HeadGrad, ProjectionHead};
use super::loss::contrastive_loss;
use super::optim::{Optimizer, OptimizerKind};
use super::sampler::{sample_positive, AugmentationPool};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub temperature: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 1e-3,
            epochs: 30,
            temperature: 0.07,
            optimizer: OptimizerKind::Adam,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.batch_size < 2 {
            p.push(format!("train.batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            p.push(format!("train.learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            p.push("train.epochs must be positive".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            p.push(format!("train.temperature must be positive, got {}", self.temperature));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigValidation(p))
        }
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(json).into()
    }
}

/// One image with its frozen embedding and the pool of text features that
/// may stand in as its positive.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub image_id: String,
    pub image_vector: Vec<f64>,
    pub pool: AugmentationPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: ProjectionHead,
    pub log: Vec<EpochLog>,
    pub steps: usize,
}

/// Split a shuffled order into batches of `n`. A trailing batch of one item
/// is folded into the previous batch since it has no negatives.
fn batches(order: &[usize], n: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(n).collect();
    if out.len() > 1 && out.last().map(|b| b.len()) == Some(1) {
        out.pop();
        let start = (out.len() - 1) * n;
        *out.last_mut().expect("non-empty") = &order[start..];
    }
    out
}

pub fn train(initial: ProjectionHead, pairs: &[AlignedPair], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if pairs.len() < config.batch_size {
        return Err(Error::InvalidArgument(format!(
            "batch size {} exceeds dataset size {}",
            config.batch_size,
            pairs.len()
        )));
    }
    for p in pairs {
        if p.image_vector.len() != initial.d_joint() {
            return Err(Error::DimMismatch {
                expected: initial.d_joint(),
                found: p.image_vector.len(),
            });
        }
        if p.pool.dim() != initial.d_text() {
            return Err(Error::DimMismatch {
                expected: initial.d_text(),
                found: p.pool.dim(),
            });
        }
    }

    let mut head = initial;
    let n_params = head.weight().len() + head.bias().len();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, n_params);
    let mut sample_rng = util::rng_for(config.seed, "train/sample");
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut util::rng_for(config.seed, &format!("train/shuffle/{epoch}")));
        let mut total = 0.0;
        let epoch_batches = batches(&order, config.batch_size);
        for batch in &epoch_batches {
            let features: Vec<&[f64]> = batch
                .iter()
                .map(|&i| sample_positive(&pairs[i].pool, &mut sample_rng))
                .collect();
            let projections = features
                .iter()
                .map(|f| head.forward(f))
                .collect::<Result<Vec<_>>>()?;
            let text: Vec<Vec<f64>> = projections.iter().map(|p| p.unit.clone()).collect();
            let image: Vec<Vec<f64>> = batch.iter().map(|&i| pairs[i].image_vector.clone()).collect();
            let out = contrastive_loss(&text, &image, config.temperature)?;
            if !out.loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            total += out.loss;

            let mut grad = HeadGrad::zeros(&head);
            for ((f, p), g) in features.iter().zip(&projections).zip(&out.grad) {
                grad.accumulate(f, p, g);
            }
            let (w, b) = head.params_mut();
            opt.step(
                w.iter_mut().chain(b.iter_mut()),
                grad.weight.iter().chain(&grad.bias).copied(),
            );
            step += 1;
        }
        let mean_loss = total / epoch_batches.len() as f64;
        let wall_ms = started.elapsed().as_millis() as u64;
        log::debug!("epoch {epoch}: mean loss {mean_loss:.6}");
        log.push(EpochLog {
            epoch,
            mean_loss,
            wall_ms,
        });
    }
    Ok(TrainOutcome { head, log, steps: step })
}

/// Per-epoch losses. Wall time is left out so reruns are byte-identical.
pub fn write_log_csv(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut out = String::from("epoch,mean_loss\n");
    for e in log {
        out.push_str(&format!("{},{}\n", e.epoch, e.mean_loss));
    }
    util::write_atomic(path, out.as_bytes())
}
