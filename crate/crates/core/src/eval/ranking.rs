use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::UNIT_TOLERANCE;
use crate::error::{Error, Result};
use crate::util;

/// A query's full gallery ordering and where its gold item landed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub query_id: String,
    pub ranked_gallery_ids: Vec<String>,
    /// 1-based.
    pub rank_of_gold: usize,
}

/// An id with its unit vector.
pub type Item<'a> = (&'a str, &'a [f64]);

fn check_unit(id: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    let n = util::l2_norm(v);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidArgument(format!("vector {id:?} has norm {n}, expected 1")));
    }
    Ok(())
}

/// Rank the whole gallery for every query by cosine similarity, descending,
/// ties broken by gallery order. `gold` maps query id to gallery id.
pub fn rank_all(queries: &[Item<'_>], gallery: &[Item<'_>], gold: &HashMap<String, String>) -> Result<Vec<RankingResult>> {
    let dim = match gallery.first().or(queries.first()) {
        Some((_, v)) => v.len(),
        None => return Ok(Vec::new()),
    };
    if gallery.is_empty() {
        return Err(Error::InvalidArgument("empty gallery".into()));
    }
    let mut gallery_pos = HashMap::with_capacity(gallery.len());
    for (i, (id, v)) in gallery.iter().enumerate() {
        check_unit(id, v, dim)?;
        if gallery_pos.insert(*id, i).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate gallery id {id:?}")));
        }
    }
    let mut gold_pos = Vec::with_capacity(queries.len());
    for (id, v) in queries {
        check_unit(id, v, dim)?;
        let g = gold.get(*id).ok_or_else(|| Error::MissingId(format!("gold for query {id}")))?;
        let pos = *gallery_pos
            .get(g.as_str())
            .ok_or_else(|| Error::MissingId(format!("gold gallery item {g} for query {id}")))?;
        gold_pos.push(pos);
    }

    let indexed: Vec<usize> = (0..queries.len()).collect();
    Ok(util::parallel_map(&indexed, 4, |&qi| {
        let (qid, qv) = queries[qi];
        // Adding 0.0 turns -0.0 into 0.0, so signed zeros tie under total_cmp.
        let sims: Vec<f64> = gallery.iter().map(|(_, gv)| util::dot(qv, gv) + 0.0).collect();
        let mut order: Vec<usize> = (0..gallery.len()).collect();
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]));
        let rank_of_gold = order.iter().position(|&i| i == gold_pos[qi]).expect("gold in gallery") + 1;
        RankingResult {
            query_id: qid.to_string(),
            ranked_gallery_ids: order.iter().map(|&i| gallery[i].0.to_string()).collect(),
            rank_of_gold,
        }
    }))
}

/// Retrieval in both directions over one caption set.
///
/// `captions` holds `(caption_id, image_id, vector)`; each image in `images`
/// must have exactly one caption. Returns (i2t, t2i) rankings.
pub fn rank_both(images: &[Item<'_>], captions: &[(&str, &str, &[f64])]) -> Result<(Vec<RankingResult>, Vec<RankingResult>)> {
    let mut caption_of: HashMap<String, String> = HashMap::new();
    for (cid, iid, _) in captions {
        if caption_of.insert(iid.to_string(), cid.to_string()).is_some() {
            return Err(Error::InvalidArgument(format!("image {iid:?} has more than one caption in the set")));
        }
    }
    let text_gallery: Vec<Item<'_>> = captions.iter().map(|(c, _, v)| (*c, *v)).collect();
    let image_of: HashMap<String, String> = captions.iter().map(|(c, i, _)| (c.to_string(), i.to_string())).collect();
    let i2t = rank_all(images, &text_gallery, &caption_of)?;
    let t2i = rank_all(&text_gallery, images, &image_of)?;
    Ok((i2t, t2i))
}
