//! Synthetic bilingual corpus with a concept-conditional description shift.
//!
//! Images of one concept cluster around a concept center inside a
//! `dim / 2`-dimensional subspace. Text vectors are built from their image:
//!
//! * machine-translated: `image + gap + noise`
//! * native:             `image + gap + shift[concept] + noise`
//! * targeted rewrite:   `image + gap + shift[concept] + noise'`
//! * paraphrase/diverse: `image + gap + noise''`
//!
//! `gap` is one text-side offset shared by every caption (the zero-shot
//! modality gap a trained projection removes). `shift` models what native
//! speakers describe differently for a concept; only targeted rewrites see it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

use super::embeddings::EmbeddingStore;
use super::types::{CaptionRecord, CaptionSource, ImageRecord, LanguageTag};

/// Within-concept spread of image vectors, relative to the unit concept center.
const IMAGE_SPREAD: f64 = 0.6;

pub const SOURCE_LANG: &str = "en";
pub const TARGET_LANG: &str = "ja";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_concepts: usize,
    pub images_per_concept: usize,
    pub dim: usize,
    pub shift_magnitude: f64,
    pub noise_sigma: f64,
    pub modality_gap: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_concepts: 4,
            images_per_concept: 200,
            dim: 16,
            shift_magnitude: 0.8,
            noise_sigma: 0.1,
            modality_gap: 1.0,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_concepts == 0 {
            problems.push("num_concepts must be positive".to_string());
        }
        if self.images_per_concept == 0 {
            problems.push("images_per_concept must be positive".to_string());
        }
        if self.dim < 4 {
            problems.push(format!("dim must be >= 4 (got {})", self.dim));
        }
        for (name, v) in [
            ("shift_magnitude", self.shift_magnitude),
            ("noise_sigma", self.noise_sigma),
            ("modality_gap", self.modality_gap),
        ] {
            if !v.is_finite() || v < 0.0 {
                problems.push(format!("{name} must be finite and non-negative (got {v})"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigValidation(problems))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub images: Vec<ImageRecord>,
    /// Concept label per image, aligned with `images`.
    pub concepts: Vec<usize>,
    pub image_store: EmbeddingStore,
    /// Keyed by machine-translated caption id.
    pub text_mt: EmbeddingStore,
    /// Keyed by native caption id.
    pub text_native: EmbeddingStore,
    /// Keyed by rewrite caption id, one entry per image and strategy.
    pub text_rewrite: EmbeddingStore,
    /// Source-language captions (the recaptioning input).
    pub captions_src: Vec<CaptionRecord>,
    pub captions_mt: Vec<CaptionRecord>,
    pub captions_native: Vec<CaptionRecord>,
}

pub fn image_id(concept: usize, item: usize) -> String {
    format!("c{concept}-i{item:04}")
}

pub fn src_caption_id(image_id: &str) -> String {
    format!("{image_id}.en")
}

pub fn mt_caption_id(image_id: &str) -> String {
    format!("{image_id}.mt")
}

pub fn native_caption_id(image_id: &str) -> String {
    format!("{image_id}.nat")
}

/// Id of the translated rewrite of `src_caption_id` under a strategy tag.
pub fn rewrite_caption_id(src_caption_id: &str, strategy_tag: &str) -> String {
    format!("{src_caption_id}~{strategy_tag}")
}

pub const REWRITE_TAGS: [(&str, CaptionSource); 3] = [
    ("paraphrase", CaptionSource::RewriteParaphrase),
    ("diverse", CaptionSource::RewriteDiverse),
    ("targeted", CaptionSource::RewriteTargeted),
];

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = util::l2_norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn add(terms: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; terms[0].len()];
    for t in terms {
        for (o, x) in out.iter_mut().zip(t.iter()) {
            *o += x;
        }
    }
    out
}

/// Orthonormal basis (rows) of a random `rank`-dimensional subspace.
fn random_basis(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
    while basis.len() < rank {
        let mut v = gaussian(rng, dim);
        for b in &basis {
            let p = util::dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        if util::l2_norm(&v) > 1e-6 {
            basis.push(unit(v));
        }
    }
    basis
}

fn embed_in(basis: &[Vec<f64>], coords: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (b, c) in basis.iter().zip(coords) {
        out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
    }
    out
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let dim = spec.dim;
    let rank = dim / 2;

    let mut layout = util::rng_for(spec.seed, "synthetic/layout");
    let basis = random_basis(&mut layout, dim, rank);
    let centers: Vec<Vec<f64>> = (0..spec.num_concepts)
        .map(|_| unit(embed_in(&basis, &gaussian(&mut layout, rank))))
        .collect();
    let shifts: Vec<Vec<f64>> = (0..spec.num_concepts)
        .map(|_| scaled(&unit(gaussian(&mut layout, dim)), spec.shift_magnitude))
        .collect();
    let gap = scaled(&unit(gaussian(&mut layout, dim)), spec.modality_gap);

    let mut rng = util::rng_for(spec.seed, "synthetic/samples");
    let src = LanguageTag::new(SOURCE_LANG)?;
    let tgt = LanguageTag::new(TARGET_LANG)?;

    let mut out = SyntheticCorpus {
        images: Vec::new(),
        concepts: Vec::new(),
        image_store: EmbeddingStore::new(dim)?,
        text_mt: EmbeddingStore::new(dim)?,
        text_native: EmbeddingStore::new(dim)?,
        text_rewrite: EmbeddingStore::new(dim)?,
        captions_src: Vec::new(),
        captions_mt: Vec::new(),
        captions_native: Vec::new(),
    };

    let spread = IMAGE_SPREAD / (rank as f64).sqrt();
    for concept in 0..spec.num_concepts {
        for item in 0..spec.images_per_concept {
            let id = image_id(concept, item);
            let offset = embed_in(&basis, &scaled(&gaussian(&mut rng, rank), spread));
            let image = unit(add(&[&centers[concept], &offset]));

            let mut noise = || scaled(&gaussian(&mut rng, dim), spec.noise_sigma);
            let mt = add(&[&image, &gap, &noise()]);
            let native = add(&[&image, &gap, &shifts[concept], &noise()]);
            let targeted = add(&[&image, &gap, &shifts[concept], &noise()]);
            let paraphrase = add(&[&image, &gap, &noise()]);
            let diverse = add(&[&image, &gap, &noise()]);

            out.image_store.insert(id.clone(), &image)?;
            let src_id = src_caption_id(&id);
            out.text_mt.insert(mt_caption_id(&id), &mt)?;
            out.text_native.insert(native_caption_id(&id), &native)?;
            for ((tag, _), v) in REWRITE_TAGS.iter().zip([&paraphrase, &diverse, &targeted]) {
                out.text_rewrite.insert(rewrite_caption_id(&src_id, tag), v)?;
            }

            out.captions_src.push(CaptionRecord {
                caption_id: src_id,
                image_id: id.clone(),
                lang: src.clone(),
                source: CaptionSource::Native,
                text: format!("A scene of concept {concept}, item {item}."),
            });
            out.captions_mt.push(CaptionRecord {
                caption_id: mt_caption_id(&id),
                image_id: id.clone(),
                lang: tgt.clone(),
                source: CaptionSource::MachineTranslated,
                text: format!("[mt] concept {concept} item {item}"),
            });
            out.captions_native.push(CaptionRecord {
                caption_id: native_caption_id(&id),
                image_id: id.clone(),
                lang: tgt.clone(),
                source: CaptionSource::Native,
                text: format!("[native] concept {concept} item {item} as seen natively"),
            });
            out.images.push(ImageRecord {
                image_id: id,
                uri: None,
            });
            out.concepts.push(concept);
        }
    }
    Ok(out)
}
