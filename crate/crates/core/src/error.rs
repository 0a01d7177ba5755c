use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// `class()` gives a stable, machine-parseable name used by the CLI and the
/// C ABI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id {id:?} (lines {first} and {second})")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("language mismatch on line {line}: expected {expected:?}, found {found:?}")]
    LanguageMismatch {
        line: usize,
        expected: String,
        found: String,
    },

    #[error("invalid language tag {0:?}")]
    InvalidLanguageTag(String),

    #[error("embedding format error: {0}")]
    EmbeddingFormat(String),

    #[error("truncated file: expected {expected} entries, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("non-finite value in vector {id:?}")]
    NonFinite { id: String },

    #[error("zero vector {id:?} cannot be normalized")]
    ZeroVector { id: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("unknown id {0:?}")]
    MissingId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reference set contains the query image {0:?}")]
    QueryInReferenceSet(String),

    #[error("reference image {image_id:?} has no {which} caption")]
    MissingCaption { image_id: String, which: &'static str },

    #[error("missing final tag")]
    MissingFinalTag,

    #[error("missing closing final tag")]
    MissingClosingTag,

    #[error("empty content between final tags")]
    EmptyFinal,

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("endpoint returned status {status} after {attempts} attempt(s)")]
    HttpStatus { status: u16, attempts: u32 },

    #[error("endpoint returned an empty response")]
    EmptyResponse,

    #[error("failure rate {rate:.3} exceeds threshold {threshold:.3} ({failures} of {total})")]
    FailureThreshold {
        failures: usize,
        total: usize,
        rate: f64,
        threshold: f64,
    },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("hypernym cycle through {0:?}")]
    Cycle(String),

    #[error("dangling reference to undeclared synset {0:?}")]
    Dangling(String),

    #[error("taxonomy parse error at line {line}: {message}")]
    TaxonomyParse { line: usize, message: String },

    #[error("supercategory sets differ")]
    SupercategoryMismatch,

    #[error("config validation failed: {}", .0.join("; "))]
    ConfigValidation(Vec<String>),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::MalformedLine { .. } => "MalformedLine",
            Error::DuplicateId { .. } => "DuplicateId",
            Error::LanguageMismatch { .. } => "LanguageMismatch",
            Error::InvalidLanguageTag(_) => "InvalidLanguageTag",
            Error::EmbeddingFormat(_) => "EmbeddingFormat",
            Error::Truncated { .. } => "Truncated",
            Error::NonFinite { .. } => "NonFinite",
            Error::ZeroVector { .. } => "ZeroVector",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::MissingId(_) => "MissingId",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::QueryInReferenceSet(_) => "QueryInReferenceSet",
            Error::MissingCaption { .. } => "MissingCaption",
            Error::MissingFinalTag => "MissingFinalTag",
            Error::MissingClosingTag => "MissingClosingTag",
            Error::EmptyFinal => "EmptyFinal",
            Error::Transport { .. } => "Transport",
            Error::HttpStatus { .. } => "HttpStatus",
            Error::EmptyResponse => "EmptyResponse",
            Error::FailureThreshold { .. } => "FailureThreshold",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::Checkpoint(_) => "Checkpoint",
            Error::Cycle(_) => "Cycle",
            Error::Dangling(_) => "Dangling",
            Error::TaxonomyParse { .. } => "TaxonomyParse",
            Error::SupercategoryMismatch => "SupercategoryMismatch",
            Error::ConfigValidation(_) => "ConfigValidation",
            Error::Json(_) => "Json",
        }
    }

    /// Number of attempts made for network errors, 1 for everything else.
    pub fn attempts(&self) -> u32 {
        match self {
            Error::Transport { attempts, .. } | Error::HttpStatus { attempts, .. } => *attempts,
            _ => 1,
        }
    }
}
