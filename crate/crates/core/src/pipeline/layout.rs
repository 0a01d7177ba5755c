use std::path::{Path, PathBuf};

use crate::recaption::RewriteStrategy;

use super::config::PipelineConfig;

/// Where each stage reads and writes inside a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    pub root: PathBuf,
}

/// Trained model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// The initialized head, never trained.
    Untrained,
    /// Machine-translated captions only.
    Mt,
    /// Machine-translated captions plus translated rewrites.
    Augmented,
    /// Native target-language captions.
    Native,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [Self::Untrained, Self::Mt, Self::Augmented, Self::Native];

    pub fn name(self) -> &'static str {
        match self {
            Self::Untrained => "untrained",
            Self::Mt => "mt",
            Self::Augmented => "augmented",
            Self::Native => "native",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }

    fn at(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.at("data")
    }
    pub fn split(&self) -> PathBuf {
        self.at("split.json")
    }
    pub fn guidance(&self) -> PathBuf {
        self.at("guidance.jsonl")
    }
    pub fn rewrites(&self, s: RewriteStrategy) -> PathBuf {
        self.at(&format!("rewrites/{}.jsonl", s.tag()))
    }
    pub fn rewrite_failures(&self, s: RewriteStrategy) -> PathBuf {
        self.at(&format!("rewrites/{}.failures.jsonl", s.tag()))
    }
    pub fn review_sample(&self, s: RewriteStrategy) -> PathBuf {
        self.at(&format!("rewrites/{}.review_sample.jsonl", s.tag()))
    }
    pub fn translated(&self, s: RewriteStrategy) -> PathBuf {
        self.at(&format!("rewrites/{}.translated.jsonl", s.tag()))
    }
    pub fn translate_failures(&self, s: RewriteStrategy) -> PathBuf {
        self.at(&format!("rewrites/{}.translate_failures.jsonl", s.tag()))
    }
    pub fn checkpoint(&self, v: ModelVariant) -> PathBuf {
        self.at(&format!("checkpoints/{}.xrc", v.name()))
    }
    pub fn train_log(&self, v: ModelVariant) -> PathBuf {
        self.at(&format!("logs/{}.train.csv", v.name()))
    }
    pub fn rankings(&self, v: ModelVariant) -> PathBuf {
        self.at(&format!("reports/rankings/{}.jsonl", v.name()))
    }
    pub fn retrieval_json(&self) -> PathBuf {
        self.at("reports/retrieval.json")
    }
    pub fn retrieval_csv(&self) -> PathBuf {
        self.at("reports/retrieval.csv")
    }
    pub fn errorsets_json(&self) -> PathBuf {
        self.at("reports/errorsets.json")
    }
    pub fn restricted_json(&self) -> PathBuf {
        self.at("reports/restricted.json")
    }
    pub fn manifest(&self, command: &str) -> PathBuf {
        self.at(&format!("manifests/{}.json", command.replace(' ', "_")))
    }
    pub fn events(&self) -> PathBuf {
        self.at("events.jsonl")
    }

    /// Path relative to the run root when inside it, for manifests.
    pub fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().replace('\\', "/")
    }
}

/// Resolved input files for a run (generated or from the config).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub images: PathBuf,
    pub image_embeddings: PathBuf,
    pub text_features: PathBuf,
    pub captions_src: PathBuf,
    pub captions_mt: PathBuf,
    pub captions_native: PathBuf,
}

impl DataPaths {
    pub fn synthetic(layout: &RunLayout) -> Self {
        let d = layout.data_dir();
        DataPaths {
            images: d.join("images.jsonl"),
            image_embeddings: d.join("images.emb"),
            text_features: d.join("text.emb"),
            captions_src: d.join("captions.src.jsonl"),
            captions_mt: d.join("captions.mt.jsonl"),
            captions_native: d.join("captions.native.jsonl"),
        }
    }

    /// Generated paths for synthetic runs, configured ones otherwise.
    /// Call after validation.
    pub fn for_config(cfg: &PipelineConfig, layout: &RunLayout) -> Self {
        if cfg.synthetic.is_some() {
            return Self::synthetic(layout);
        }
        let p = &cfg.paths;
        let get = |x: &Option<PathBuf>| x.clone().unwrap_or_default();
        DataPaths {
            images: get(&p.images),
            image_embeddings: get(&p.image_embeddings),
            text_features: get(&p.text_features),
            captions_src: get(&p.captions_src),
            captions_mt: get(&p.captions_mt),
            captions_native: get(&p.captions_native),
        }
    }

    pub fn all(&self) -> [&Path; 6] {
        [
            &self.images,
            &self.image_embeddings,
            &self.text_features,
            &self.captions_src,
            &self.captions_mt,
            &self.captions_native,
        ]
    }
}
