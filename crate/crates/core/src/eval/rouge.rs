use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    #[serde(rename = "r1")]
    R1,
    #[serde(rename = "r2")]
    R2,
    #[serde(rename = "r3")]
    R3,
    #[serde(rename = "r4")]
    R4,
    #[serde(rename = "rL")]
    RL,
}

impl RougeVariant {
    pub const ALL: [RougeVariant; 5] = [Self::R1, Self::R2, Self::R3, Self::R4, Self::RL];

    pub fn name(self) -> &'static str {
        match self {
            Self::R1 => "r1",
            Self::R2 => "r2",
            Self::R3 => "r3",
            Self::R4 => "r4",
            Self::RL => "rL",
        }
    }
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RougeVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ROUGE variant {s:?}")))
    }
}

/// Lowercase, split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn f1(overlap: usize, cand: usize, reference: usize) -> f64 {
    if overlap == 0 || cand == 0 || reference == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in tokens.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// F1 in [0, 1]; 0 when either side has no n-grams of the order.
pub fn rouge(candidate: &str, reference: &str, variant: RougeVariant) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    match variant {
        RougeVariant::RL => f1(lcs_len(&c, &r), c.len(), r.len()),
        v => {
            let n = match v {
                RougeVariant::R1 => 1,
                RougeVariant::R2 => 2,
                RougeVariant::R3 => 3,
                _ => 4,
            };
            if c.len() < n || r.len() < n {
                return 0.0;
            }
            let cc = ngram_counts(&c, n);
            let rc = ngram_counts(&r, n);
            let overlap = cc.iter().map(|(g, k)| (*k).min(*rc.get(g).unwrap_or(&0))).sum();
            f1(overlap, c.len() + 1 - n, r.len() + 1 - n)
        }
    }
}

/// Mean F1 per variant over aligned (candidate, reference) pairs.
pub fn rouge_corpus(pairs: &[(&str, &str)]) -> Vec<(RougeVariant, f64)> {
    RougeVariant::ALL
        .into_iter()
        .map(|v| {
            let total: f64 = pairs.iter().map(|(c, r)| rouge(c, r, v)).sum();
            (v, if pairs.is_empty() { 0.0 } else { total / pairs.len() as f64 })
        })
        .collect()
}

/// Mean F1 per variant over candidates, each scored as the mean over its
/// references. Candidates without references are skipped.
pub fn rouge_multi(items: &[(&str, Vec<&str>)]) -> Vec<(RougeVariant, f64)> {
    let scored: Vec<&(&str, Vec<&str>)> = items.iter().filter(|(_, refs)| !refs.is_empty()).collect();
    RougeVariant::ALL
        .into_iter()
        .map(|v| {
            let total: f64 = scored
                .iter()
                .map(|(c, refs)| refs.iter().map(|r| rouge(c, r, v)).sum::<f64>() / refs.len() as f64)
                .sum();
            (v, if scored.is_empty() { 0.0 } else { total / scored.len() as f64 })
        })
        .collect()
}
