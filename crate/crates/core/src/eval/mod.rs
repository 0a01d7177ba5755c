//! Retrieval evaluation, native-vs-translation error sets and ROUGE.

mod ranking;
mod report;
mod rouge;

pub use ranking::{rank_all, rank_both, Item, RankingResult};
pub use report::{
    build_error_set, is_error_member, recall_at, recall_report, restricted_report, Direction, ErrorSet,
    RetrievalReport, ERROR_SET_CUTOFF, RECALL_KS,
};
pub use rouge::{rouge, rouge_corpus, rouge_multi, tokenize, RougeVariant};
