//! Batch rewrite generation and translation of the results.
//!
//! Rewrites are produced in the source language and only then translated:
//! [`translate_rewrites`] accepts nothing but a finished [`RewriteSet`].

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionRecord, LanguageTag};
use crate::error::{Error, Result};
use crate::refsel::GuidanceExample;
use crate::util;

use super::client::{ChatCompletion, GenerationParams, TranslationParams, Translator};
use super::parse::parse_final;
use super::templates::{render_prompt, RewriteStrategy, FORMAT_REMINDER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriteConfig {
    /// Abort when failures / inputs exceeds this.
    pub failure_threshold: f64,
    /// Maximum requests in flight.
    pub concurrency: usize,
    /// Re-prompt once with a format reminder when parsing fails.
    pub format_retry: bool,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        RewriteConfig {
            failure_threshold: 0.05,
            concurrency: 4,
            format_retry: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteResult {
    pub train_caption_id: String,
    pub image_id: String,
    pub strategy: RewriteStrategy,
    pub raw_output: String,
    pub extracted_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guidance: Option<GuidanceExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub caption_id: String,
    pub stage: String,
    pub error_class: String,
    pub attempts: u32,
    pub message: String,
}

impl FailureRecord {
    fn new(caption_id: &str, stage: &str, err: &Error, attempts: u32) -> Self {
        FailureRecord {
            caption_id: caption_id.to_string(),
            stage: stage.to_string(),
            error_class: err.class().to_string(),
            attempts,
            message: err.to_string(),
        }
    }
}

/// Output of one recaptioning run. `results.len() + failures.len() == total`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteSet {
    pub strategy: RewriteStrategy,
    pub results: Vec<RewriteResult>,
    pub failures: Vec<FailureRecord>,
    pub total: usize,
}

impl RewriteSet {
    pub fn write(&self, results_path: &Path, failures_path: &Path) -> Result<()> {
        util::write_atomic(results_path, &util::to_jsonl(&self.results)?)?;
        util::write_atomic(failures_path, &util::to_jsonl(&self.failures)?)
    }

    /// Reload results written by [`RewriteSet::write`].
    pub fn read(results_path: &Path) -> Result<Self> {
        let results: Vec<RewriteResult> = util::read_jsonl(results_path)?.into_iter().map(|(_, r)| r).collect();
        let strategy = match results.first() {
            Some(r) => r.strategy,
            None => return Err(Error::InvalidArgument(format!("{} has no rewrites", results_path.display()))),
        };
        if let Some(r) = results.iter().find(|r| r.strategy != strategy) {
            return Err(Error::InvalidArgument(format!(
                "mixed strategies in {} ({})",
                results_path.display(),
                r.train_caption_id
            )));
        }
        let total = results.len();
        Ok(RewriteSet {
            strategy,
            results,
            failures: Vec::new(),
            total,
        })
    }
}

fn check_threshold(failures: usize, total: usize, threshold: f64) -> Result<()> {
    if total == 0 {
        return Ok(());
    }
    let rate = failures as f64 / total as f64;
    if rate > threshold {
        return Err(Error::FailureThreshold {
            failures,
            total,
            rate,
            threshold,
        });
    }
    Ok(())
}

/// Rewrite every caption with one strategy.
///
/// `guidance` is keyed by image id and must cover every caption's image for
/// the targeted strategy. `image_uris` maps image ids to the URI attached for
/// image-conditioned strategies.
pub fn build_rewrite_set(
    captions: &[CaptionRecord],
    strategy: RewriteStrategy,
    guidance: &HashMap<String, GuidanceExample>,
    image_uris: &HashMap<String, String>,
    chat: &dyn ChatCompletion,
    params: &GenerationParams,
    config: &RewriteConfig,
) -> Result<RewriteSet> {
    params.validate()?;
    if strategy.needs_guidance() {
        let missing: Vec<&str> = captions
            .iter()
            .filter(|c| !guidance.contains_key(&c.image_id))
            .map(|c| c.image_id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} caption(s) lack a guidance assignment (first: {:?})",
                missing.len(),
                missing[0]
            )));
        }
    }

    let outcomes = util::parallel_map(captions, config.concurrency, |cap| {
        let g = if strategy.needs_guidance() {
            guidance.get(&cap.image_id)
        } else {
            None
        };
        let prompt = render_prompt(strategy, &cap.text, g).map_err(|e| FailureRecord::new(&cap.caption_id, "render", &e, 0))?;
        let image = if strategy.uses_image() {
            image_uris.get(&cap.image_id).map(String::as_str)
        } else {
            None
        };
        let mut attempts = 0;
        let mut ask = |prompt: &str| {
            chat.complete(prompt, image, params).map_err(|e| {
                attempts += e.attempts();
                FailureRecord::new(&cap.caption_id, "complete", &e, attempts)
            })
        };
        let mut raw = ask(&prompt)?;
        let mut parsed = parse_final(&raw);
        if parsed.is_err() && config.format_retry {
            raw = ask(&format!("{prompt}{FORMAT_REMINDER}"))?;
            parsed = parse_final(&raw);
        }
        let extracted = parsed.map_err(|e| FailureRecord::new(&cap.caption_id, "parse", &e, 1))?;
        Ok(RewriteResult {
            train_caption_id: cap.caption_id.clone(),
            image_id: cap.image_id.clone(),
            strategy,
            raw_output: raw,
            extracted_text: extracted,
            guidance: g.cloned(),
        })
    });

    let mut set = RewriteSet {
        strategy,
        results: Vec::new(),
        failures: Vec::new(),
        total: captions.len(),
    };
    for o in outcomes {
        match o {
            Ok(r) => set.results.push(r),
            Err(f) => set.failures.push(f),
        }
    }
    if !set.failures.is_empty() {
        log::warn!("{} of {} {} rewrites failed", set.failures.len(), set.total, strategy.tag());
    }
    check_threshold(set.failures.len(), set.total, config.failure_threshold)?;
    Ok(set)
}

/// Translations keyed by caption id, shared across calls.
#[derive(Debug, Default)]
pub struct TranslationCache {
    inner: Mutex<HashMap<String, String>>,
}

impl TranslationCache {
    pub fn len(&self) -> usize {
        self.inner.lock().expect("poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_translate(&self, key: &str, f: impl FnOnce() -> Result<String>) -> Result<String> {
        if let Some(v) = self.inner.lock().expect("poisoned").get(key) {
            return Ok(v.clone());
        }
        let v = f()?;
        self.inner.lock().expect("poisoned").insert(key.to_string(), v.clone());
        Ok(v)
    }
}

/// Translate guidance output captions into the prompt language.
///
/// Examples already in `prompt_lang` are left alone.
pub fn localize_guidance(
    guidance: &HashMap<String, GuidanceExample>,
    translator: &dyn Translator,
    prompt_lang: &LanguageTag,
    params: &TranslationParams,
    cache: &TranslationCache,
) -> Result<HashMap<String, GuidanceExample>> {
    let mut keys: Vec<&String> = guidance.keys().collect();
    keys.sort();
    let mut out = HashMap::with_capacity(guidance.len());
    for key in keys {
        let mut g = guidance[key].clone();
        if &g.output_caption.lang != prompt_lang {
            let text = cache.get_or_translate(&g.output_caption.caption_id, || {
                translator.translate(&g.output_caption.text, &g.output_caption.lang, prompt_lang, params)
            })?;
            g.output_caption.text = text;
            g.output_caption.lang = prompt_lang.clone();
        }
        out.insert(key.clone(), g);
    }
    Ok(out)
}

pub fn rewrite_caption_id(train_caption_id: &str, strategy: RewriteStrategy) -> String {
    format!("{train_caption_id}~{}", strategy.tag())
}

/// Translate finished rewrites into target-language caption records.
pub fn translate_rewrites(
    set: &RewriteSet,
    translator: &dyn Translator,
    source_lang: &LanguageTag,
    target_lang: &LanguageTag,
    params: &TranslationParams,
    config: &RewriteConfig,
) -> Result<(Vec<CaptionRecord>, Vec<FailureRecord>)> {
    let outcomes = util::parallel_map(&set.results, config.concurrency, |r| {
        let id = rewrite_caption_id(&r.train_caption_id, set.strategy);
        translator
            .translate(&r.extracted_text, source_lang, target_lang, params)
            .map(|text| CaptionRecord {
                caption_id: id.clone(),
                image_id: r.image_id.clone(),
                lang: target_lang.clone(),
                source: set.strategy.caption_source(),
                text,
            })
            .map_err(|e| FailureRecord::new(&id, "translate", &e, e.attempts()))
    });
    split_outcomes(outcomes, config)
}

/// Translate plain captions (e.g. to build the machine-translated baseline).
pub fn translate_captions(
    captions: &[CaptionRecord],
    translator: &dyn Translator,
    target_lang: &LanguageTag,
    params: &TranslationParams,
    config: &RewriteConfig,
    id_for: impl Fn(&CaptionRecord) -> String + Sync,
) -> Result<(Vec<CaptionRecord>, Vec<FailureRecord>)> {
    let outcomes = util::parallel_map(captions, config.concurrency, |c| {
        let id = id_for(c);
        translator
            .translate(&c.text, &c.lang, target_lang, params)
            .map(|text| CaptionRecord {
                caption_id: id.clone(),
                image_id: c.image_id.clone(),
                lang: target_lang.clone(),
                source: if c.source.is_rewrite() {
                    c.source
                } else {
                    crate::corpus::CaptionSource::MachineTranslated
                },
                text,
            })
            .map_err(|e| FailureRecord::new(&id, "translate", &e, e.attempts()))
    });
    split_outcomes(outcomes, config)
}

fn split_outcomes(
    outcomes: Vec<std::result::Result<CaptionRecord, FailureRecord>>,
    config: &RewriteConfig,
) -> Result<(Vec<CaptionRecord>, Vec<FailureRecord>)> {
    let total = outcomes.len();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for o in outcomes {
        match o {
            Ok(c) => ok.push(c),
            Err(f) => failed.push(f),
        }
    }
    check_threshold(failed.len(), total, config.failure_threshold)?;
    Ok((ok, failed))
}
