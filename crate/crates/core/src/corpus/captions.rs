//! Caption JSONL reading and writing.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::util;

use super::types::{CaptionRecord, ImageRecord, LanguageTag};

/// Read a caption JSONL file.
///
/// Records are returned in file order. When `expected_lang` is set every
/// record must carry that tag.
pub fn ingest_captions(path: &Path, expected_lang: Option<&LanguageTag>) -> Result<Vec<CaptionRecord>> {
    let rows: Vec<(usize, CaptionRecord)> = util::read_jsonl(path)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        if rec.text.trim().is_empty() {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line,
                message: "caption text is empty".into(),
            });
        }
        if rec.caption_id.is_empty() || rec.image_id.is_empty() {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line,
                message: "caption_id and image_id must be non-empty".into(),
            });
        }
        if let Some(&first) = seen.get(&rec.caption_id) {
            return Err(Error::DuplicateId {
                id: rec.caption_id,
                first,
                second: line,
            });
        }
        if let Some(lang) = expected_lang {
            if &rec.lang != lang {
                return Err(Error::LanguageMismatch {
                    line,
                    expected: lang.to_string(),
                    found: rec.lang.to_string(),
                });
            }
        }
        seen.insert(rec.caption_id.clone(), line);
        out.push(rec);
    }
    Ok(out)
}

pub fn write_captions(path: &Path, records: &[CaptionRecord]) -> Result<()> {
    util::write_atomic(path, &util::to_jsonl(records)?)
}

pub fn ingest_images(path: &Path) -> Result<Vec<ImageRecord>> {
    let rows: Vec<(usize, ImageRecord)> = util::read_jsonl(path)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        if let Some(&first) = seen.get(&rec.image_id) {
            return Err(Error::DuplicateId {
                id: rec.image_id,
                first,
                second: line,
            });
        }
        seen.insert(rec.image_id.clone(), line);
        out.push(rec);
    }
    Ok(out)
}

pub fn write_images(path: &Path, records: &[ImageRecord]) -> Result<()> {
    util::write_atomic(path, &util::to_jsonl(records)?)
}

/// Every caption must point at a known image.
pub fn check_image_refs(captions: &[CaptionRecord], images: &[ImageRecord]) -> Result<()> {
    let known: HashSet<&str> = images.iter().map(|i| i.image_id.as_str()).collect();
    match captions.iter().find(|c| !known.contains(c.image_id.as_str())) {
        Some(c) => Err(Error::MissingId(c.image_id.clone())),
        None => Ok(()),
    }
}

/// Group captions by image id, preserving file order within each image.
pub fn by_image(captions: &[CaptionRecord]) -> HashMap<&str, Vec<&CaptionRecord>> {
    let mut map: HashMap<&str, Vec<&CaptionRecord>> = HashMap::new();
    for c in captions {
        map.entry(c.image_id.as_str()).or_default().push(c);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::CaptionSource;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn single_line_maps_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "c.jsonl",
            "{\"caption_id\":\"c1\",\"image_id\":\"i1\",\"lang\":\"ja\",\"source\":\"native\",\"text\":\"弁当\"}\n",
        );
        let recs = ingest_captions(&p, None).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].source, CaptionSource::Native);
        assert_eq!(recs[0].text, "弁当");
        assert_eq!(recs[0].lang.as_str(), "ja");
    }

    #[test]
    fn duplicate_reports_both_lines() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::new();
        for i in 1..=9 {
            let id = if i == 3 || i == 9 { "c1".to_string() } else { format!("x{i}") };
            body.push_str(&format!(
                "{{\"caption_id\":\"{id}\",\"image_id\":\"i\",\"lang\":\"en\",\"source\":\"native\",\"text\":\"t\"}}\n"
            ));
        }
        let p = write(dir.path(), "d.jsonl", &body);
        match ingest_captions(&p, None) {
            Err(Error::DuplicateId { id, first, second }) => {
                assert_eq!(id, "c1");
                assert_eq!((first, second), (3, 9));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_number_and_language_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ok = "{\"caption_id\":\"a\",\"image_id\":\"i\",\"lang\":\"en\",\"source\":\"native\",\"text\":\"t\"}\n";
        let p = write(dir.path(), "m.jsonl", &format!("{ok}{{not json\n"));
        assert!(matches!(ingest_captions(&p, None), Err(Error::MalformedLine { line: 2, .. })));

        let p = write(dir.path(), "l.jsonl", ok);
        let ja = LanguageTag::new("ja").unwrap();
        assert!(matches!(ingest_captions(&p, Some(&ja)), Err(Error::LanguageMismatch { line: 1, .. })));
    }

    #[test]
    fn empty_text_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.jsonl",
            "{\"caption_id\":\"a\",\"image_id\":\"i\",\"lang\":\"en\",\"source\":\"native\",\"text\":\"  \"}\n",
        );
        assert!(matches!(ingest_captions(&p, None), Err(Error::MalformedLine { .. })));
    }
}
