use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ranking::RankingResult;

/// Recall@{1,5,10} in both directions, in percent, at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub i2t_r1: f64,
    pub i2t_r5: f64,
    pub i2t_r10: f64,
    pub t2i_r1: f64,
    pub t2i_r5: f64,
    pub t2i_r10: f64,
    pub mean_recall: f64,
}

pub const RECALL_KS: [usize; 3] = [1, 5, 10];

pub fn recall_at(rankings: &[RankingResult], k: usize) -> f64 {
    if rankings.is_empty() {
        return 0.0;
    }
    let hits = rankings.iter().filter(|r| r.rank_of_gold <= k).count();
    100.0 * hits as f64 / rankings.len() as f64
}

impl RetrievalReport {
    /// From the six scores in field order; the mean is derived.
    pub fn from_scores(s: [f64; 6]) -> Self {
        RetrievalReport {
            i2t_r1: s[0],
            i2t_r5: s[1],
            i2t_r10: s[2],
            t2i_r1: s[3],
            t2i_r5: s[4],
            t2i_r10: s[5],
            mean_recall: s.iter().sum::<f64>() / 6.0,
        }
    }

    pub fn scores(&self) -> [f64; 6] {
        [self.i2t_r1, self.i2t_r5, self.i2t_r10, self.t2i_r1, self.t2i_r5, self.t2i_r10]
    }

    /// Element-wise mean, e.g. across several gold caption sets.
    pub fn mean(reports: &[RetrievalReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let mut s = [0.0; 6];
        for r in reports {
            for (acc, x) in s.iter_mut().zip(r.scores()) {
                *acc += x;
            }
        }
        Some(Self::from_scores(s.map(|x| x / reports.len() as f64)))
    }

    pub const CSV_HEADER: &'static str = "i2t_r1,i2t_r5,i2t_r10,t2i_r1,t2i_r5,t2i_r10,mean_recall";

    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> = self.scores().iter().map(|x| format!("{x:.1}")).collect();
        cols.push(format!("{:.1}", self.mean_recall));
        cols.join(",")
    }
}

impl fmt::Display for RetrievalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "I2T {:.1}/{:.1}/{:.1}  T2I {:.1}/{:.1}/{:.1}  mean {:.1}",
            self.i2t_r1, self.i2t_r5, self.i2t_r10, self.t2i_r1, self.t2i_r5, self.t2i_r10, self.mean_recall
        )
    }
}

pub fn recall_report(i2t: &[RankingResult], t2i: &[RankingResult]) -> Result<RetrievalReport> {
    if i2t.is_empty() || t2i.is_empty() {
        return Err(Error::InvalidArgument("recall needs non-empty rankings in both directions".into()));
    }
    let mut s = [0.0; 6];
    for (i, k) in RECALL_KS.iter().enumerate() {
        s[i] = recall_at(i2t, *k);
        s[i + 3] = recall_at(t2i, *k);
    }
    Ok(RetrievalReport::from_scores(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    I2t,
    T2i,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::I2t => "i2t",
            Direction::T2i => "t2i",
        })
    }
}

/// Queries the native-trained model gets within rank 10 and the
/// translation-trained model does not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSet {
    pub direction: Direction,
    pub member_ids: Vec<String>,
}

impl ErrorSet {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

pub const ERROR_SET_CUTOFF: usize = 10;

pub fn is_error_member(native_rank: usize, mt_rank: usize) -> bool {
    native_rank <= ERROR_SET_CUTOFF && mt_rank > ERROR_SET_CUTOFF
}

/// Members are listed in `native` order.
pub fn build_error_set(native: &[RankingResult], mt: &[RankingResult], direction: Direction) -> Result<ErrorSet> {
    let mt_rank: HashMap<&str, usize> = mt.iter().map(|r| (r.query_id.as_str(), r.rank_of_gold)).collect();
    let native_ids: HashSet<&str> = native.iter().map(|r| r.query_id.as_str()).collect();
    if native_ids.len() != mt_rank.len() || native_ids.iter().any(|id| !mt_rank.contains_key(id)) {
        return Err(Error::InvalidArgument(format!(
            "{direction} rankings cover different queries ({} native vs {} translation)",
            native_ids.len(),
            mt_rank.len()
        )));
    }
    let member_ids = native
        .iter()
        .filter(|r| is_error_member(r.rank_of_gold, mt_rank[r.query_id.as_str()]))
        .map(|r| r.query_id.clone())
        .collect();
    Ok(ErrorSet { direction, member_ids })
}

/// Recall over error-set members only; ranks still come from the full gallery.
pub fn restricted_report(
    i2t: &[RankingResult],
    t2i: &[RankingResult],
    i2t_set: &ErrorSet,
    t2i_set: &ErrorSet,
) -> Result<RetrievalReport> {
    let pick = |rankings: &[RankingResult], set: &ErrorSet| -> Result<Vec<RankingResult>> {
        if set.is_empty() {
            return Err(Error::InvalidArgument(format!("{} error set is empty", set.direction)));
        }
        let by_id: HashMap<&str, &RankingResult> = rankings.iter().map(|r| (r.query_id.as_str(), r)).collect();
        set.member_ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|r| (*r).clone())
                    .ok_or_else(|| Error::MissingId(format!("{} error-set member {id}", set.direction)))
            })
            .collect()
    };
    recall_report(&pick(i2t, i2t_set)?, &pick(t2i, t2i_set)?)
}
