use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

use super::nouns::LemmaAliases;
use super::taxonomy::{supercategory_of, SupercategorySet, Taxonomy};

/// Noun counts grouped by supercategory.
///
/// `sum(counts) + unmapped + unmatched == total_nouns`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDistribution {
    /// Supercategory name to lemma counts, in set order.
    pub supercategories: Vec<(String, BTreeMap<String, usize>)>,
    pub total_nouns: usize,
    /// Lemmas absent from the lemma index.
    pub unmapped_count: usize,
    /// Lemmas whose closure reaches no anchor.
    pub unmatched_count: usize,
    /// Report threshold: only counts strictly above it are listed.
    pub min_count: usize,
}

impl TermDistribution {
    pub fn mapped_count(&self) -> usize {
        self.supercategories.iter().flat_map(|(_, m)| m.values()).sum()
    }

    pub fn conserves(&self) -> bool {
        self.mapped_count() + self.unmapped_count + self.unmatched_count == self.total_nouns
    }

    pub fn count(&self, supercategory: &str, lemma: &str) -> usize {
        self.supercategories
            .iter()
            .find(|(n, _)| n == supercategory)
            .and_then(|(_, m)| m.get(lemma))
            .copied()
            .unwrap_or(0)
    }

    /// Terms with count above `min_count`, per supercategory.
    pub fn report(&self) -> Vec<(String, Vec<(String, usize)>)> {
        self.supercategories
            .iter()
            .map(|(name, m)| {
                let terms = m
                    .iter()
                    .filter(|(_, c)| **c > self.min_count)
                    .map(|(t, c)| (t.clone(), *c))
                    .collect();
                (name.clone(), terms)
            })
            .collect()
    }
}

pub fn distribution(
    nouns_per_caption: &[Vec<String>],
    taxonomy: &Taxonomy,
    supercats: &SupercategorySet,
    aliases: Option<&LemmaAliases>,
    min_count: usize,
) -> TermDistribution {
    let mut counts: BTreeMap<&str, BTreeMap<String, usize>> = supercats.names().map(|n| (n, BTreeMap::new())).collect();
    let mut dist = TermDistribution {
        supercategories: Vec::new(),
        total_nouns: 0,
        unmapped_count: 0,
        unmatched_count: 0,
        min_count,
    };
    let mut cache: BTreeMap<String, Option<&str>> = BTreeMap::new();
    for lemma in nouns_per_caption.iter().flatten() {
        dist.total_nouns += 1;
        let lemma = aliases.map_or(lemma.as_str(), |a| a.resolve(lemma));
        if !taxonomy.has_lemma(lemma) {
            dist.unmapped_count += 1;
            continue;
        }
        let sc = *cache
            .entry(lemma.to_string())
            .or_insert_with(|| supercategory_of(lemma, taxonomy, supercats));
        match sc {
            Some(name) => *counts.get_mut(name).expect("known name").entry(lemma.to_string()).or_insert(0) += 1,
            None => dist.unmatched_count += 1,
        }
    }
    dist.supercategories = supercats
        .names()
        .map(|n| (n.to_string(), counts.remove(n).unwrap_or_default()))
        .collect();
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub supercategory: String,
    pub term: String,
    pub count_a: usize,
    pub count_b: usize,
    /// `count_a / count_b`; infinite when `count_b` is 0.
    pub ratio: f64,
    /// Set when either count is zero.
    pub flagged: bool,
}

impl ComparisonRow {
    pub fn ratio_text(&self) -> String {
        if self.ratio.is_infinite() {
            "inf".into()
        } else {
            format!("{:.3}", self.ratio)
        }
    }
}

/// Union of terms above `union_threshold` in either distribution, per
/// supercategory, with both counts.
pub fn compare(a: &TermDistribution, b: &TermDistribution, union_threshold: usize) -> Result<Vec<ComparisonRow>> {
    let names = |d: &TermDistribution| d.supercategories.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    if names(a) != names(b) {
        return Err(Error::SupercategoryMismatch);
    }
    let mut rows = Vec::new();
    for ((name, ma), (_, mb)) in a.supercategories.iter().zip(&b.supercategories) {
        let mut terms: Vec<&String> = ma
            .iter()
            .chain(mb.iter())
            .filter(|(_, c)| **c > union_threshold)
            .map(|(t, _)| t)
            .collect();
        terms.sort();
        terms.dedup();
        for t in terms {
            let ca = ma.get(t).copied().unwrap_or(0);
            let cb = mb.get(t).copied().unwrap_or(0);
            rows.push(ComparisonRow {
                supercategory: name.clone(),
                term: t.clone(),
                count_a: ca,
                count_b: cb,
                ratio: if cb == 0 { f64::INFINITY } else { ca as f64 / cb as f64 },
                flagged: ca == 0 || cb == 0,
            });
        }
    }
    Ok(rows)
}

pub const COMPARISON_CSV_HEADER: &str = "term,count_a,count_b,ratio,flagged";

/// One CSV per supercategory: `<dir>/<name>.csv`. Returns the files written.
pub fn write_comparison_csv(dir: &Path, rows: &[ComparisonRow], supercats: &[String]) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for name in supercats {
        let mut out = format!("{COMPARISON_CSV_HEADER}\n");
        for r in rows.iter().filter(|r| &r.supercategory == name) {
            out.push_str(&format!("{},{},{},{},{}\n", r.term, r.count_a, r.count_b, r.ratio_text(), r.flagged));
        }
        let path = dir.join(format!("{name}.csv"));
        util::write_atomic(&path, out.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Taxonomy, SupercategorySet) {
        let t = Taxonomy::parse(
            "sofa\tseat\nseat\tfurniture\nbread\tfood\nrock\tthing\n[lemmas]\nsofa\tsofa\nfurniture\tfurniture\nbread\tbread\nfood\tfood\nrock\trock\n",
        )
        .unwrap();
        let s = SupercategorySet::from_names(&["furniture", "food"], &t).unwrap();
        (t, s)
    }

    fn nouns(words: &[&str]) -> Vec<Vec<String>> {
        vec![words.iter().map(|w| w.to_string()).collect()]
    }

    #[test]
    fn empty_corpus() {
        let (t, s) = setup();
        let d = distribution(&[], &t, &s, None, 0);
        assert_eq!(d.total_nouns, 0);
        assert_eq!(d.mapped_count(), 0);
        assert!(d.conserves());
    }

    #[test]
    fn threshold_is_report_only() {
        let (t, s) = setup();
        let d = distribution(&vec![vec!["sofa".to_string()]; 100], &t, &s, None, 150);
        assert_eq!(d.count("furniture", "sofa"), 100);
        assert!(d.report().iter().all(|(_, terms)| terms.is_empty()));
    }

    #[test]
    fn conservation() {
        let (t, s) = setup();
        let d = distribution(&nouns(&["sofa", "rock", "plate", "bread", "food"]), &t, &s, None, 0);
        assert_eq!((d.mapped_count(), d.unmapped_count, d.unmatched_count), (3, 1, 1));
        assert!(d.conserves());
    }

    #[test]
    fn compare_rows() {
        let (t, s) = setup();
        let a = distribution(&nouns(&["sofa", "sofa", "bread"]), &t, &s, None, 0);
        let b = distribution(&nouns(&["sofa"]), &t, &s, None, 0);
        let rows = compare(&a, &a, 0).unwrap();
        assert!(rows.iter().all(|r| r.ratio == 1.0 && !r.flagged));
        let rows = compare(&a, &b, 0).unwrap();
        let bread = rows.iter().find(|r| r.term == "bread").unwrap();
        assert!(bread.flagged && bread.ratio.is_infinite() && bread.ratio_text() == "inf");
        assert_eq!(rows.iter().find(|r| r.term == "sofa").unwrap().ratio, 2.0);
        let other = SupercategorySet::from_names(&["food"], &t).unwrap();
        let c = distribution(&[], &t, &other, None, 0);
        assert!(matches!(compare(&a, &c, 0), Err(Error::SupercategoryMismatch)));
    }
}
