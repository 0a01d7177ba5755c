use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageTag, SyntheticSpec};
use crate::error::{Error, Result};
use crate::recaption::{
    ChatCompletion, GenerationParams, HttpChatClient, HttpSettings, HttpTranslator, IdentityTranslator, ImageTransport,
    OracleChat, RetryPolicy, RewriteConfig, RewriteStrategy, TranslationParams, Translator,
};
use crate::refsel::RefSelConfig;
use crate::trainer::TrainConfig;

pub const LLM_KEY_ENV: &str = "XRECAP_LLM_API_KEY";
pub const MT_KEY_ENV: &str = "XRECAP_MT_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpEndpoint {
    /// Full URL the JSON body is POSTed to.
    pub url: String,
    pub model: String,
    pub auth_header: String,
    pub auth_prefix: String,
    pub api_key: Option<String>,
    pub image_transport: ImageTransport,
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
}

impl Default for HttpEndpoint {
    fn default() -> Self {
        HttpEndpoint {
            url: String::new(),
            model: String::new(),
            auth_header: "Authorization".into(),
            auth_prefix: "Bearer ".into(),
            api_key: None,
            image_transport: ImageTransport::Uri,
            retry: RetryPolicy::default(),
            timeout_secs: 120,
        }
    }
}

impl HttpEndpoint {
    fn settings(&self, key_env: &str) -> HttpSettings {
        let key = std::env::var(key_env).ok().or_else(|| self.api_key.clone());
        HttpSettings {
            url: self.url.clone(),
            auth: key.map(|k| (self.auth_header.clone(), format!("{}{k}", self.auth_prefix))),
            retry: self.retry,
            timeout: Duration::from_secs(self.timeout_secs),
        }
    }
}

/// `oracle` answers from the prompt itself; `http` calls a real endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmEndpoint {
    Oracle,
    Http(HttpEndpoint),
}

/// `identity` returns its input; `http` calls a real endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MtEndpoint {
    Identity,
    Http(HttpEndpoint),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointsConfig {
    pub llm: LlmEndpoint,
    pub mt: MtEndpoint,
}

impl Default for EndpointsConfig {
    fn default() -> Self {
        EndpointsConfig {
            llm: LlmEndpoint::Oracle,
            mt: MtEndpoint::Identity,
        }
    }
}

impl EndpointsConfig {
    pub fn chat(&self) -> Result<Box<dyn ChatCompletion>> {
        Ok(match &self.llm {
            LlmEndpoint::Oracle => Box::new(OracleChat),
            LlmEndpoint::Http(h) => Box::new(HttpChatClient::new(&h.settings(LLM_KEY_ENV), &h.model, h.image_transport)?),
        })
    }

    pub fn translator(&self) -> Result<Box<dyn Translator>> {
        Ok(match &self.mt {
            MtEndpoint::Identity => Box::new(IdentityTranslator),
            MtEndpoint::Http(h) => Box::new(HttpTranslator::new(&h.settings(MT_KEY_ENV))?),
        })
    }
}

/// Input files. Relative paths are resolved against the config file's
/// directory. Ignored when a `[synthetic]` section generates the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub images: Option<PathBuf>,
    pub image_embeddings: Option<PathBuf>,
    /// Text features keyed by caption id (MT, native and translated rewrites).
    pub text_features: Option<PathBuf>,
    /// Source-language captions; these are recaptioned.
    pub captions_src: Option<PathBuf>,
    /// Machine-translated target-language captions (training baseline).
    pub captions_mt: Option<PathBuf>,
    /// Native target-language captions (guidance outputs, evaluation gold).
    pub captions_native: Option<PathBuf>,
    /// Precomputed split; computed into the run directory when absent.
    pub split: Option<PathBuf>,
    /// Precomputed guidance assignments.
    pub guidance: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ref_fraction: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ref_fraction: 0.2,
            train_fraction: 0.6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Gold caption sets for evaluation; defaults to the native captions.
    pub gold_sets: Vec<PathBuf>,
    /// Size of the random rewrite sample exported for manual review.
    pub review_sample: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            gold_sets: Vec::new(),
            review_sample: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub source_lang: String,
    pub target_lang: String,
    pub synthetic: Option<SyntheticSpec>,
    pub paths: PathsConfig,
    pub split: SplitConfig,
    pub refsel: RefSelConfig,
    pub endpoints: EndpointsConfig,
    pub generation: GenerationParams,
    pub translation: TranslationParams,
    pub recaption: RewriteConfig,
    pub strategies: Vec<RewriteStrategy>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("run"),
            source_lang: "en".into(),
            target_lang: "ja".into(),
            synthetic: None,
            paths: PathsConfig::default(),
            split: SplitConfig::default(),
            refsel: RefSelConfig::default(),
            endpoints: EndpointsConfig::default(),
            generation: GenerationParams::default(),
            translation: TranslationParams::default(),
            recaption: RewriteConfig::default(),
            strategies: vec![RewriteStrategy::TargetedRecaption],
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// The bundled offline configuration over the synthetic corpus.
pub const SYNTHETIC_CONFIG: &str = include_str!("../../configs/synthetic.toml");

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigValidation(vec![e.message().to_string()]))
    }

    /// Parse and make relative paths absolute against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let p = &mut self.paths;
        for slot in [
            &mut p.images,
            &mut p.image_embeddings,
            &mut p.text_features,
            &mut p.captions_src,
            &mut p.captions_mt,
            &mut p.captions_native,
            &mut p.split,
            &mut p.guidance,
            &mut p.taxonomy,
        ] {
            if let Some(path) = slot.as_mut() {
                fix(path);
            }
        }
        self.eval.gold_sets.iter_mut().for_each(fix);
    }

    pub fn source(&self) -> Result<LanguageTag> {
        LanguageTag::new(self.source_lang.clone())
    }

    pub fn target(&self) -> Result<LanguageTag> {
        LanguageTag::new(self.target_lang.clone())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::util::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Every problem found, not just the first. File existence is checked
    /// only for inputs that are not generated.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (name, tag) in [("source_lang", &self.source_lang), ("target_lang", &self.target_lang)] {
            if LanguageTag::new(tag.clone()).is_err() {
                p.push(format!("{name} {tag:?} is not a valid language tag"));
            }
        }
        if let Some(spec) = &self.synthetic {
            if let Err(e) = spec.validate() {
                p.push(format!("synthetic: {e}"));
            }
        } else {
            let req = [
                ("paths.images", &self.paths.images),
                ("paths.image_embeddings", &self.paths.image_embeddings),
                ("paths.text_features", &self.paths.text_features),
                ("paths.captions_src", &self.paths.captions_src),
                ("paths.captions_mt", &self.paths.captions_mt),
                ("paths.captions_native", &self.paths.captions_native),
            ];
            for (name, path) in req {
                match path {
                    None => p.push(format!("{name} is required without a [synthetic] section")),
                    Some(path) if !path.exists() => p.push(format!("{name}: {} does not exist", path.display())),
                    _ => {}
                }
            }
        }
        for (name, path) in [
            ("paths.split", &self.paths.split),
            ("paths.guidance", &self.paths.guidance),
            ("paths.taxonomy", &self.paths.taxonomy),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    p.push(format!("{name}: {} does not exist", path.display()));
                }
            }
        }
        for g in &self.eval.gold_sets {
            if !g.exists() {
                p.push(format!("eval.gold_sets: {} does not exist", g.display()));
            }
        }
        let s = &self.split;
        if !(s.ref_fraction > 0.0 && s.train_fraction > 0.0 && s.ref_fraction + s.train_fraction <= 1.0) {
            p.push(format!(
                "split fractions must be positive with sum <= 1 (ref {}, train {})",
                s.ref_fraction, s.train_fraction
            ));
        }
        if self.refsel.k == 0 {
            p.push("refsel.k must be >= 1".into());
        }
        if let Err(e) = self.generation.validate() {
            p.push(format!("generation: {e}"));
        }
        if self.translation.max_tokens == 0 {
            p.push("translation.max_tokens must be >= 1".into());
        }
        let r = &self.recaption;
        if !(0.0..=1.0).contains(&r.failure_threshold) {
            p.push(format!("recaption.failure_threshold must be in [0, 1], got {}", r.failure_threshold));
        }
        if r.concurrency == 0 {
            p.push("recaption.concurrency must be >= 1".into());
        }
        let mut seen = Vec::new();
        for s in &self.strategies {
            if seen.contains(s) {
                p.push(format!("strategy {} listed twice", s.tag()));
            }
            seen.push(*s);
        }
        p.extend(self.train.problems());
        for (name, ep) in [
            ("endpoints.llm", matches!(&self.endpoints.llm, LlmEndpoint::Http(h) if h.url.is_empty())),
            ("endpoints.mt", matches!(&self.endpoints.mt, MtEndpoint::Http(h) if h.url.is_empty())),
        ] {
            if ep {
                p.push(format!("{name}.url is required for http endpoints"));
            }
        }
        if let LlmEndpoint::Http(h) = &self.endpoints.llm {
            if h.model.is_empty() {
                p.push("endpoints.llm.model is required for http endpoints".into());
            }
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
}

/// Parse a strategy from its tag (`paraphrase`, `diverse`, `targeted`) or
/// its full name.
pub fn parse_strategy(s: &str) -> Result<RewriteStrategy> {
    RewriteStrategy::from_tag(s)
        .or_else(|| serde_json::from_value(serde_json::Value::String(s.to_string())).ok())
        .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
}
