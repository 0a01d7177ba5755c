//! Prompt rendering, LLM/MT clients and batch rewrite generation.

pub mod client;
mod parse;
mod rewrite;
mod templates;

pub use client::{
    ChatCompletion, Decoding, GenerationParams, HttpChatClient, HttpSettings, HttpTranslator, IdentityTranslator,
    ImageTransport, OracleChat, RetryPolicy, TranslationParams, Translator,
};
pub use parse::{parse_final, wrap_final, CLOSE_TAG, OPEN_TAG};
pub use rewrite::{
    build_rewrite_set, localize_guidance, rewrite_caption_id, translate_captions, translate_rewrites, FailureRecord,
    RewriteConfig, RewriteResult, RewriteSet, TranslationCache,
};
pub use templates::{
    reference_block, render_prompt, RewriteStrategy, DIVERSE_TEMPLATE, FORMAT_REMINDER, PARAPHRASE_TEMPLATE,
    TARGETED_TEMPLATE,
};
