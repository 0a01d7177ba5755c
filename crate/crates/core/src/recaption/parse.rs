use crate::error::{Error, Result};

pub const OPEN_TAG: &str = "<final>";
pub const CLOSE_TAG: &str = "</final>";

/// Text between the first `<final>` and the next `</final>`, trimmed.
pub fn parse_final(raw: &str) -> Result<String> {
    let start = raw.find(OPEN_TAG).ok_or(Error::MissingFinalTag)? + OPEN_TAG.len();
    let len = raw[start..].find(CLOSE_TAG).ok_or(Error::MissingClosingTag)?;
    let text = raw[start..start + len].trim();
    if text.is_empty() {
        return Err(Error::EmptyFinal);
    }
    Ok(text.to_string())
}

/// The answer format the prompts ask for.
pub fn wrap_final(caption: &str) -> String {
    format!("{OPEN_TAG} {caption} {CLOSE_TAG}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_and_trims() {
        assert_eq!(parse_final("<final> A bento box with rice. </final>").unwrap(), "A bento box with rice.");
    }

    #[test]
    fn first_match_wins() {
        assert_eq!(parse_final("noise <final>x</final> tail <final>y</final>").unwrap(), "x");
    }

    #[test]
    fn error_cases() {
        let e = parse_final("no tags here").unwrap_err();
        assert_eq!(e.to_string(), "missing final tag");
        assert!(matches!(parse_final("<final> open only"), Err(Error::MissingClosingTag)));
        assert!(matches!(parse_final("<final>  \n </final>"), Err(Error::EmptyFinal)));
        assert!(matches!(parse_final("</final> before <final>"), Err(Error::MissingClosingTag)));
    }

    #[test]
    fn multibyte_content() {
        assert_eq!(parse_final("前<final>弁当箱</final>後").unwrap(), "弁当箱");
    }
}
