//! Corpus data model, splits, file formats and the synthetic generator.

mod captions;
mod embeddings;
mod split;
pub mod synthetic;
mod types;

pub use captions::{by_image, check_image_refs, ingest_captions, ingest_images, write_captions, write_images};
pub use embeddings::{ingest_embeddings, EmbeddingStore, EMB_MAGIC, UNIT_TOLERANCE};
pub use split::{make_split, CorpusSplit};
pub use synthetic::{generate_synthetic, SyntheticCorpus, SyntheticSpec};
pub use types::{CaptionRecord, CaptionSource, ImageRecord, LanguageTag};
