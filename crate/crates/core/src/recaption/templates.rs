//! The three rewrite prompts.
//!
//! Placeholders are `{input}` and `{reference_examples}`. Every template ends
//! with `"Output: "` (trailing space, no newline).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refsel::GuidanceExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteStrategy {
    Paraphrase,
    DiverseRecaption,
    TargetedRecaption,
}

impl RewriteStrategy {
    pub const ALL: [RewriteStrategy; 3] = [
        RewriteStrategy::Paraphrase,
        RewriteStrategy::DiverseRecaption,
        RewriteStrategy::TargetedRecaption,
    ];

    pub fn needs_guidance(self) -> bool {
        self == RewriteStrategy::TargetedRecaption
    }

    /// Image attached to the request? Paraphrasing is text-only.
    pub fn uses_image(self) -> bool {
        self != RewriteStrategy::Paraphrase
    }

    /// Short tag used in rewrite caption ids and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            RewriteStrategy::Paraphrase => "paraphrase",
            RewriteStrategy::DiverseRecaption => "diverse",
            RewriteStrategy::TargetedRecaption => "targeted",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.tag() == tag)
    }

    pub fn caption_source(self) -> crate::corpus::CaptionSource {
        use crate::corpus::CaptionSource;
        match self {
            RewriteStrategy::Paraphrase => CaptionSource::RewriteParaphrase,
            RewriteStrategy::DiverseRecaption => CaptionSource::RewriteDiverse,
            RewriteStrategy::TargetedRecaption => CaptionSource::RewriteTargeted,
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            RewriteStrategy::Paraphrase => PARAPHRASE_TEMPLATE,
            RewriteStrategy::DiverseRecaption => DIVERSE_TEMPLATE,
            RewriteStrategy::TargetedRecaption => TARGETED_TEMPLATE,
        }
    }
}

pub const PARAPHRASE_TEMPLATE: &str = "\
Task: The objective is to paraphrase an English caption to reflect diversity in how speakers around the world describe objects, especially across languages. It is very important to strictly follow the listed requirements.

Requirements:
- Output only a single paraphrased caption which must start with <final> and end with </final>.
- Example: <final> There is a blue bicycle and red motorcycle on the street. </final>
- Do not output any additional quotes, text, comments, explanations, or details. Just the caption.

Please complete this example:
Input: {input}
Output: ";

pub const DIVERSE_TEMPLATE: &str = "\
Task Description: For an input image and an input caption, produce a one-sentence image caption that differs significantly from the input caption in order of phrases, sentence structure, semantic content, which objects are described, and/or level of detail. Make sure the output differs from the input caption and use the image for guidance. Only perform changes that are correct and semantically relevant to the given input image. After \"Output: \", always output a <final> tag, followed by a rewritten caption, then </final>. Never any other text or explanation. One task demo for formatting and change instruction is provided.

Task Demo:
Inference
Input: A young boy holding a baseball bat during a baseball game.
Output: <final> The batter in the grey uniform is waiting for a ball during a game. </final>

Now perform the task exactly as above:
Inference
Input: {input}
Output: ";

pub const TARGETED_TEMPLATE: &str = "\
Task Description: For an input image, image caption, and reference input-output caption(s) for similar image(s), rewrite the image caption with similar changes to the style, level of detail, and object terms as in the reference examples. Only perform changes that are correct and semantically relevant to the given input image. After \"Output: \", always output a <final> tag, followed by a rewritten caption, then </final>. Never any other text or explanation. One task demo for formatting and change instruction is provided.

Task Demo:
Reference example(s)
Input: A catcher catching a ball that has just gone by the hitter.
Output: The batter in the orange uniform just missed the ball.
Inference
Input: A young boy holding a baseball bat during a baseball game.
Output: <final> The batter in the grey uniform is waiting for a ball during a game. </final>

Now perform the task exactly as above:
Reference example(s)
{reference_examples}

Inference
Input: {input}
Output: ";

/// Appended to the prompt on the optional format retry.
pub const FORMAT_REMINDER: &str =
    "\n\nReminder: respond with exactly one caption that starts with <final> and ends with </final>.";

/// `Input: <src>` / `Output: <tgt>` block for one guidance example.
pub fn reference_block(guidance: &GuidanceExample) -> String {
    format!(
        "Input: {}\nOutput: {}",
        guidance.input_caption.text.trim(),
        guidance.output_caption.text.trim()
    )
}

pub fn render_prompt(strategy: RewriteStrategy, input_caption: &str, guidance: Option<&GuidanceExample>) -> Result<String> {
    match (strategy.needs_guidance(), guidance) {
        (true, None) => Err(Error::InvalidArgument(
            "targeted recaptioning requires a guidance example".into(),
        )),
        (false, Some(_)) => Err(Error::InvalidArgument(format!(
            "{} does not take a guidance example",
            strategy.tag()
        ))),
        (true, Some(g)) => Ok(fill(
            TARGETED_TEMPLATE,
            &[("{reference_examples}", &reference_block(g)), ("{input}", input_caption)],
        )),
        (false, None) => Ok(fill(strategy.template(), &[("{input}", input_caption)])),
    }
}

/// Single-pass substitution: text inserted for one placeholder is never
/// scanned for another.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    loop {
        let next = slots
            .iter()
            .filter_map(|(key, value)| rest.find(key).map(|pos| (pos, *key, *value)))
            .min_by_key(|(pos, _, _)| *pos);
        match next {
            Some((pos, key, value)) => {
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + key.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}
