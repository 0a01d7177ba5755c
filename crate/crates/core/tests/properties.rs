//! Randomized invariants checked against brute-force oracles.

use std::collections::HashMap;

use proptest::prelude::*;

use xrecap::corpus::{CaptionRecord, CaptionSource, EmbeddingStore, LanguageTag};
use xrecap::eval::{build_error_set, rank_all, rouge, Direction, RankingResult, RougeVariant, ERROR_SET_CUTOFF};
use xrecap::recaption::{
    build_rewrite_set, wrap_final, ChatCompletion, GenerationParams, RewriteConfig, RewriteStrategy,
};
use xrecap::refsel::NnIndex;
use xrecap::termlens::{distribution, SupercategorySet, Taxonomy, DEFAULT_SUPERCATEGORIES};
use xrecap::trainer::{Checkpoint, ProjectionHead};
use xrecap::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() + 0.0
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Nonzero vectors with small integer coordinates, so exact ties are common.
fn coarse(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2i8..=2, d)
        .prop_filter("nonzero", |v| v.iter().any(|x| *x != 0))
        .prop_map(|v| v.into_iter().map(f64::from).collect())
}

/// Indices sorted by descending similarity; lower index first among equals.
fn oracle_order(rows: &[Vec<f64>], q: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && dot(&rows[idx[j]], q) > dot(&rows[idx[j - 1]], q) {
            idx.swap(j, j - 1);
            j -= 1;
        }
    }
    idx
}

fn gallery_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..8, 1usize..40).prop_flat_map(|(d, n)| (prop::collection::vec(coarse(d), n), coarse(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn knn_equals_brute_force_and_prefixes_agree((rows, q) in gallery_case(), k_frac in 0.0f64..1.0) {
        let d = q.len();
        let mut store = EmbeddingStore::new(d).unwrap();
        let ids: Vec<String> = (0..rows.len()).map(|i| format!("r{i:03}")).collect();
        for (id, r) in ids.iter().zip(&rows) {
            store.insert(id.clone(), r).unwrap();
        }
        let index = NnIndex::build(&store, &ids).unwrap();
        let k = 1 + ((rows.len() - 1) as f64 * k_frac) as usize;
        let got: Vec<String> = index.query(&q, k).unwrap().into_iter().map(|n| n.image_id).collect();
        // The store keeps normalized f32 rows; rank exactly what it holds.
        let stored: Vec<Vec<f64>> = ids.iter().map(|id| store.get_f64(id).unwrap()).collect();
        let want: Vec<String> = oracle_order(&stored, &q).into_iter().take(k).map(|i| ids[i].clone()).collect();
        prop_assert_eq!(&got, &want);
        let all: Vec<String> = index.query(&q, rows.len()).unwrap().into_iter().map(|n| n.image_id).collect();
        prop_assert_eq!(&all[..k], &got[..]);
    }

    #[test]
    fn rank_all_matches_sort_oracle((rows, q) in gallery_case(), gold_frac in 0.0f64..1.0) {
        let gallery: Vec<Vec<f64>> = rows.iter().map(|r| unit(r)).collect();
        let query = unit(&q);
        let ids: Vec<String> = (0..gallery.len()).map(|i| format!("g{i}")).collect();
        let gold_pos = ((gallery.len() - 1) as f64 * gold_frac) as usize;
        let gold = HashMap::from([("q".to_string(), ids[gold_pos].clone())]);
        let gi: Vec<(&str, &[f64])> = ids.iter().map(String::as_str).zip(gallery.iter().map(Vec::as_slice)).collect();
        let got = rank_all(&[("q", &query)], &gi, &gold).unwrap();
        let order = oracle_order(&gallery, &query);
        prop_assert_eq!(got[0].rank_of_gold, order.iter().position(|&i| i == gold_pos).unwrap() + 1);
        let want: Vec<String> = order.iter().map(|&i| ids[i].clone()).collect();
        prop_assert_eq!(&got[0].ranked_gallery_ids, &want);
    }

    #[test]
    fn error_set_is_the_rank_conjunction(ranks in prop::collection::vec((1usize..30, 1usize..30), 0..60)) {
        let make = |pick: fn(&(usize, usize)) -> usize| -> Vec<RankingResult> {
            ranks.iter().enumerate().map(|(i, r)| RankingResult {
                query_id: format!("q{i}"),
                ranked_gallery_ids: Vec::new(),
                rank_of_gold: pick(r),
            }).collect()
        };
        let set = build_error_set(&make(|r| r.0), &make(|r| r.1), Direction::T2i).unwrap();
        let want: Vec<String> = ranks.iter().enumerate()
            .filter(|(_, (n, m))| *n <= ERROR_SET_CUTOFF && *m > ERROR_SET_CUTOFF)
            .map(|(i, _)| format!("q{i}"))
            .collect();
        prop_assert_eq!(set.member_ids, want);
    }

    #[test]
    fn rouge_is_symmetric_and_bounded(
        a in prop::collection::vec("[a-e]{1,3}", 0..12),
        b in prop::collection::vec("[a-e]{1,3}", 0..12),
    ) {
        let (a, b) = (a.join(" "), b.join(" "));
        for v in RougeVariant::ALL {
            let ab = rouge(&a, &b, v);
            prop_assert!((0.0..=1.0).contains(&ab), "{} = {ab}", v.name());
            prop_assert!((ab - rouge(&b, &a, v)).abs() < 1e-12);
        }
    }

    #[test]
    fn rewrite_results_plus_failures_cover_every_caption(fail in prop::collection::vec(any::<bool>(), 1..30)) {
        let caps: Vec<CaptionRecord> = (0..fail.len()).map(|i| CaptionRecord {
            caption_id: format!("c{i}"),
            image_id: format!("i{i}"),
            lang: LanguageTag::new("en").unwrap(),
            source: CaptionSource::Native,
            text: format!("caption {i} {}", if fail[i] { "FAIL" } else { "ok" }),
        }).collect();
        let cfg = RewriteConfig { failure_threshold: 1.0, ..RewriteConfig::default() };
        let set = build_rewrite_set(&caps, RewriteStrategy::Paraphrase, &HashMap::new(), &HashMap::new(),
            &Selective, &GenerationParams::default(), &cfg).unwrap();
        prop_assert_eq!(set.total, caps.len());
        prop_assert_eq!(set.results.len() + set.failures.len(), set.total);
        prop_assert_eq!(set.failures.len(), fail.iter().filter(|f| **f).count());
        let ok: Vec<String> = caps.iter().zip(&fail).filter(|(_, f)| !**f).map(|(c, _)| c.caption_id.clone()).collect();
        let got: Vec<String> = set.results.iter().map(|r| r.train_caption_id.clone()).collect();
        prop_assert_eq!(got, ok);
    }

    #[test]
    fn term_counts_are_conserved(nouns in prop::collection::vec(prop::collection::vec(
        prop::sample::select(vec!["dog", "puppy", "car", "truck", "bread", "sofa", "widget", "zzz", "lunchbox"]), 0..6), 0..20)) {
        let t = Taxonomy::load(&fixture("taxonomy.tsv")).unwrap();
        let sc = SupercategorySet::from_names(&DEFAULT_SUPERCATEGORIES, &t).unwrap();
        let nouns: Vec<Vec<String>> = nouns.into_iter().map(|c| c.into_iter().map(String::from).collect()).collect();
        let dist = distribution(&nouns, &t, &sc, None, 0);
        let mapped: usize = dist.supercategories.iter().flat_map(|(_, m)| m.values()).sum();
        prop_assert_eq!(dist.total_nouns, nouns.iter().map(Vec::len).sum::<usize>());
        prop_assert_eq!(mapped + dist.unmapped_count + dist.unmatched_count, dist.total_nouns);
    }

    #[test]
    fn embedding_store_round_trips(d in 1usize..10, rows in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 10), 0..20)) {
        let mut store = EmbeddingStore::new(d).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let v: Vec<f64> = r[..d].iter().map(|x| f64::from(*x)).collect();
            store.insert(format!("id{i}"), &v).unwrap();
        }
        let back = EmbeddingStore::from_emb1_bytes(&store.to_emb1_bytes()).unwrap();
        prop_assert_eq!(back.ids(), store.ids());
        for id in store.ids() {
            prop_assert_eq!(back.get(id), store.get(id));
        }
    }

    #[test]
    fn checkpoint_round_trips(d_text in 1usize..12, d_joint in 1usize..12, seed in any::<u64>(), hash in any::<[u8; 32]>()) {
        let ck = Checkpoint { head: ProjectionHead::init(d_text, d_joint, seed), seed, config_hash: hash };
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        prop_assert_eq!(back, ck);
    }
}

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Fails on prompts whose input caption contains "FAIL".
struct Selective;

impl ChatCompletion for Selective {
    fn complete(&self, prompt: &str, _: Option<&str>, _: &GenerationParams) -> Result<String> {
        let input = prompt.lines().rev().find_map(|l| l.strip_prefix("Input: ")).unwrap_or("");
        if input.contains("FAIL") {
            Err(Error::EmptyResponse)
        } else {
            Ok(wrap_final(input))
        }
    }
}
