use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Lowercase BCP-47-style language code such as `en`, `ja` or `pt-br`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn new(code: impl Into<String>) -> Result<Self, Error> {
        let code = code.into();
        let valid = !code.is_empty()
            && code.chars().all(|c| c.is_ascii_lowercase() || c == '-')
            && !code.starts_with('-')
            && !code.ends_with('-');
        if valid {
            Ok(LanguageTag(code))
        } else {
            Err(Error::InvalidLanguageTag(code))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageTag {
    type Error = Error;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        LanguageTag::new(value)
    }
}

impl From<LanguageTag> for String {
    fn from(tag: LanguageTag) -> Self {
        tag.0
    }
}

impl FromStr for LanguageTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::new(s)
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
}

/// Where a caption came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionSource {
    Native,
    MachineTranslated,
    RewriteParaphrase,
    RewriteDiverse,
    RewriteTargeted,
}

impl CaptionSource {
    pub fn is_rewrite(self) -> bool {
        matches!(
            self,
            CaptionSource::RewriteParaphrase
                | CaptionSource::RewriteDiverse
                | CaptionSource::RewriteTargeted
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub image_id: String,
    pub lang: LanguageTag,
    pub source: CaptionSource,
    pub text: String,
}
