//! Cross-lingual recaptioning toolkit.
//!
//! Stages, in pipeline order: [`refsel`] picks a guidance example for each
//! training image, [`recaption`] rewrites captions through LLM and MT
//! endpoints, [`trainer`] fits a text projection head with rewrite
//! augmentation, and [`eval`] scores retrieval. [`termlens`] compares how
//! corpora in two languages name objects.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod recaption;
pub mod refsel;
pub mod termlens;
pub mod trainer;
pub mod util;

pub use error::{Error, Result};
