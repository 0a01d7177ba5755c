//! Config-driven orchestration of the full pipeline with run manifests.

mod config;
mod layout;
mod manifest;
mod stages;

pub use config::{
    parse_strategy, EndpointsConfig, EvalConfig, HttpEndpoint, LlmEndpoint, MtEndpoint, PathsConfig, PipelineConfig,
    SplitConfig, LLM_KEY_ENV, MT_KEY_ENV, SYNTHETIC_CONFIG,
};
pub use layout::{DataPaths, ModelVariant, RunLayout};
pub use manifest::{EventLog, RunManifest};
pub use stages::{build_pairs, evaluate_head, train_head, Evaluation, RankLine, Run, StageReport};
