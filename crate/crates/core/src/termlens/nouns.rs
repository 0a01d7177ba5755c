use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::CaptionRecord;
use crate::error::{Error, Result};
use crate::util;

use super::taxonomy::Taxonomy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub text: String,
    pub pos: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretaggedCaption {
    pub caption_id: String,
    pub tokens: Vec<TaggedToken>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractMode {
    Pretagged,
    Lexicon,
}

/// Plural suffix rule; `None` when no rule applies.
fn strip_plural(word: &str) -> Option<String> {
    if let Some(stem) = word.strip_suffix("ies") {
        if !stem.is_empty() {
            return Some(format!("{stem}y"));
        }
    }
    for suffix in ["sses", "xes", "zes", "ches", "shes"] {
        if word.ends_with(suffix) {
            return Some(word[..word.len() - 2].to_string());
        }
    }
    if word.len() > 1 && word.ends_with('s') && !word.ends_with("ss") {
        return Some(word[..word.len() - 1].to_string());
    }
    None
}

/// Lowercase lemma. With a lexicon, the surface form wins if listed, then
/// any suffix-stripped candidate that is listed; otherwise the rule result.
pub fn lemmatize(word: &str, lexicon: Option<&Taxonomy>) -> String {
    let word = word.to_lowercase();
    if let Some(tax) = lexicon {
        if tax.has_lemma(&word) {
            return word;
        }
        let mut candidates = Vec::new();
        if let Some(stem) = word.strip_suffix("ies") {
            candidates.push(format!("{stem}y"));
        }
        if let Some(stem) = word.strip_suffix("es") {
            candidates.push(stem.to_string());
        }
        if let Some(stem) = word.strip_suffix('s') {
            candidates.push(stem.to_string());
        }
        if let Some(c) = candidates.into_iter().find(|c| !c.is_empty() && tax.has_lemma(c)) {
            return c;
        }
    }
    strip_plural(&word).unwrap_or(word)
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

/// Tokens tagged `NOUN`, lemmatized.
pub fn nouns_pretagged(tokens: &[TaggedToken], lexicon: Option<&Taxonomy>) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| t.pos == "NOUN")
        .map(|t| lemmatize(&t.text, lexicon))
        .collect()
}

/// Every token whose lemma is in the taxonomy's lemma index. Duplicates kept.
pub fn nouns_lexicon(text: &str, taxonomy: &Taxonomy) -> Vec<String> {
    words(text)
        .map(|w| lemmatize(w, Some(taxonomy)))
        .filter(|l| taxonomy.has_lemma(l))
        .collect()
}

pub fn read_pretagged(path: &Path) -> Result<HashMap<String, PretaggedCaption>> {
    let mut out = HashMap::new();
    for (line, rec) in util::read_jsonl::<PretaggedCaption>(path)? {
        if let Some(prev) = out.insert(rec.caption_id.clone(), rec) {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate caption_id {:?}", prev.caption_id),
            });
        }
    }
    Ok(out)
}

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Nouns for each caption, in caption order.
///
/// In pretagged mode every caption needs a tagged record whose token texts,
/// concatenated, spell the caption (whitespace ignored).
pub fn extract_corpus(
    captions: &[CaptionRecord],
    mode: ExtractMode,
    pretagged: Option<&HashMap<String, PretaggedCaption>>,
    taxonomy: &Taxonomy,
) -> Result<Vec<Vec<String>>> {
    captions
        .iter()
        .map(|c| match mode {
            ExtractMode::Lexicon => Ok(nouns_lexicon(&c.text, taxonomy)),
            ExtractMode::Pretagged => {
                let tagged = pretagged
                    .ok_or_else(|| Error::InvalidArgument("pretagged mode needs a tagged token file".into()))?
                    .get(&c.caption_id)
                    .ok_or_else(|| Error::MissingId(format!("pretagged tokens for caption {}", c.caption_id)))?;
                let joined: String = tagged.tokens.iter().map(|t| squeeze(&t.text)).collect();
                if joined != squeeze(&c.text) {
                    return Err(Error::InvalidArgument(format!(
                        "pretagged tokens for caption {} do not match its text",
                        c.caption_id
                    )));
                }
                Ok(nouns_pretagged(&tagged.tokens, Some(taxonomy)))
            }
        })
        .collect()
}

/// Synonym merging applied to lemmas before counting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaAliases(HashMap<String, String>);

impl LemmaAliases {
    pub fn new(map: HashMap<String, String>) -> Self {
        LemmaAliases(map.into_iter().map(|(a, b)| (a.to_lowercase(), b.to_lowercase())).collect())
    }

    /// Lines `alias<TAB>canonical`; `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (a, b) = line.split_once('\t').ok_or_else(|| Error::TaxonomyParse {
                line: i + 1,
                message: "alias lines are alias<TAB>canonical".into(),
            })?;
            map.insert(a.trim().to_string(), b.trim().to_string());
        }
        Ok(Self::new(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn resolve<'a>(&'a self, lemma: &'a str) -> &'a str {
        self.0.get(lemma).map(String::as_str).unwrap_or(lemma)
    }
}
