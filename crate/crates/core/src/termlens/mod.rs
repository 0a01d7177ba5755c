//! Object-term distributions: nouns are mapped to a taxonomy, grouped under
//! supercategories by hypernym closure, counted, and compared across corpora.

mod distribution;
mod nouns;
mod taxonomy;

pub use distribution::{
    compare, distribution, write_comparison_csv, ComparisonRow, TermDistribution, COMPARISON_CSV_HEADER,
};
pub use nouns::{
    extract_corpus, lemmatize, nouns_lexicon, nouns_pretagged, read_pretagged, ExtractMode, LemmaAliases,
    PretaggedCaption, TaggedToken,
};
pub use taxonomy::{supercategory_of, SupercategorySet, Taxonomy, DEFAULT_SUPERCATEGORIES};
