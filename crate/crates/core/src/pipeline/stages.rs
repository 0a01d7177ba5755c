//! Pipeline stages. Each reads its inputs from files and writes its outputs
//! into the run directory, so a full run equals its stages run one by one.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{self, CaptionRecord, CorpusSplit, EmbeddingStore};
use crate::error::{Error, Result};
use crate::eval::{self, Direction, RankingResult, RetrievalReport};
use crate::recaption::{self, RewriteSet, RewriteStrategy, TranslationCache};
use crate::refsel::{self, GuidanceSelector, NnIndex};
use crate::trainer::{self, AlignedPair, AugmentationPool, Checkpoint, ProjectionHead, TrainConfig, TrainOutcome};
use crate::util;

use super::config::PipelineConfig;
use super::layout::{DataPaths, ModelVariant, RunLayout};
use super::manifest::{EventLog, RunManifest};

/// What a stage touched, for the manifest.
#[derive(Debug, Clone, Default)]
pub struct StageReport {
    pub stage: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<(String, u64)>,
    pub elapsed_ms: u64,
    /// One-line human summary for stderr.
    pub summary: String,
}

/// A validated configuration bound to its run directory.
#[derive(Debug)]
pub struct Run {
    pub config: PipelineConfig,
    pub layout: RunLayout,
    pub data: DataPaths,
    pub events: EventLog,
}

impl Run {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let layout = RunLayout::new(config.out_dir.clone());
        let data = DataPaths::for_config(&config, &layout);
        let events = EventLog::to_file(layout.events());
        Ok(Run {
            config,
            layout,
            data,
            events,
        })
    }

    pub fn split_path(&self) -> PathBuf {
        self.config.paths.split.clone().unwrap_or_else(|| self.layout.split())
    }

    pub fn guidance_path(&self) -> PathBuf {
        self.config.paths.guidance.clone().unwrap_or_else(|| self.layout.guidance())
    }

    pub fn gold_sets(&self) -> Vec<PathBuf> {
        if self.config.eval.gold_sets.is_empty() {
            vec![self.data.captions_native.clone()]
        } else {
            self.config.eval.gold_sets.clone()
        }
    }

    /// Manifest for a command built from the stages it ran.
    pub fn manifest(&self, command: &str, stages: &[StageReport]) -> Result<RunManifest> {
        let mut m = RunManifest::new(command, &self.config.hash());
        let produced: HashSet<&PathBuf> = stages.iter().flat_map(|s| &s.outputs).collect();
        for s in stages {
            for p in &s.inputs {
                if !produced.contains(p) {
                    m.add_input(self.layout.relative(p), p)?;
                }
            }
            for p in &s.outputs {
                m.add_output(self.layout.relative(p), p)?;
            }
            for (k, v) in &s.seeds {
                m.seeds.insert(k.clone(), *v);
            }
            m.timings_ms.insert(s.stage.clone(), s.elapsed_ms);
        }
        Ok(m)
    }

    fn finish(&self, mut report: StageReport, started: Instant) -> StageReport {
        report.elapsed_ms = started.elapsed().as_millis() as u64;
        self.events.emit(
            &report.stage,
            "done",
            json!({
                "outputs": report.outputs.iter().map(|p| self.layout.relative(p)).collect::<Vec<_>>(),
                "elapsed_ms": report.elapsed_ms,
                "summary": report.summary,
            }),
        );
        report
    }

    pub fn synth(&self) -> Result<StageReport> {
        let started = Instant::now();
        let spec = self
            .config
            .synthetic
            .as_ref()
            .ok_or_else(|| Error::ConfigValidation(vec!["corpus synth needs a [synthetic] section".into()]))?;
        let c = corpus::generate_synthetic(spec)?;
        let d = &self.data;
        corpus::write_images(&d.images, &c.images)?;
        c.image_store.write(&d.image_embeddings)?;
        let mut text = EmbeddingStore::new(spec.dim)?;
        for store in [&c.text_mt, &c.text_native, &c.text_rewrite] {
            for (id, v) in store.iter() {
                text.insert_f32(id, v)?;
            }
        }
        text.write(&d.text_features)?;
        corpus::write_captions(&d.captions_src, &c.captions_src)?;
        corpus::write_captions(&d.captions_mt, &c.captions_mt)?;
        corpus::write_captions(&d.captions_native, &c.captions_native)?;
        let report = StageReport {
            stage: "corpus synth".into(),
            outputs: d.all().iter().map(|p| p.to_path_buf()).collect(),
            seeds: vec![("synthetic".into(), spec.seed)],
            summary: format!("{} images, {} text vectors", c.images.len(), text.len()),
            ..Default::default()
        };
        Ok(self.finish(report, started))
    }

    pub fn split(&self) -> Result<StageReport> {
        let started = Instant::now();
        let images = corpus::ingest_images(&self.data.images)?;
        let ids: Vec<String> = images.into_iter().map(|i| i.image_id).collect();
        let s = &self.config.split;
        let split = corpus::make_split(&ids, s.ref_fraction, s.train_fraction, s.seed)?;
        let out = self.layout.split();
        split.write(&out)?;
        let report = StageReport {
            stage: "split make".into(),
            inputs: vec![self.data.images.clone()],
            outputs: vec![out],
            seeds: vec![("split".into(), s.seed)],
            summary: format!(
                "reference {} / train {} / eval {}",
                split.reference_ids.len(),
                split.train_ids.len(),
                split.eval_ids.len()
            ),
            ..Default::default()
        };
        Ok(self.finish(report, started))
    }

    pub fn refsel_assign(&self) -> Result<StageReport> {
        let started = Instant::now();
        let split_path = self.split_path();
        let split = CorpusSplit::read(&split_path)?;
        let store = EmbeddingStore::read(&self.data.image_embeddings)?;
        let src = corpus::ingest_captions(&self.data.captions_src, Some(&self.config.source()?))?;
        let tgt = corpus::ingest_captions(&self.data.captions_native, Some(&self.config.target()?))?;
        let index = NnIndex::build(&store, &split.reference_ids)?;
        let selector = GuidanceSelector::new(&index, &src, &tgt, self.config.refsel)?;
        let assignments = split
            .train_ids
            .iter()
            .map(|id| {
                let v = store.get_f64(id).ok_or_else(|| Error::MissingId(id.clone()))?;
                Ok(selector.select(id, &v)?.assignment(id))
            })
            .collect::<Result<Vec<_>>>()?;
        let out = self.layout.guidance();
        refsel::write_assignments(&out, &assignments)?;
        let report = StageReport {
            stage: "refsel assign".into(),
            inputs: vec![
                split_path,
                self.data.image_embeddings.clone(),
                self.data.captions_src.clone(),
                self.data.captions_native.clone(),
            ],
            outputs: vec![out],
            seeds: vec![("refsel".into(), self.config.refsel.seed)],
            summary: format!("{} guidance assignments (k = {})", assignments.len(), self.config.refsel.k),
            ..Default::default()
        };
        Ok(self.finish(report, started))
    }

    fn require(path: &Path, hint: &str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::ConfigValidation(vec![format!("{} not found; {hint}", path.display())]))
        }
    }

    pub fn recap(&self, strategies: &[RewriteStrategy]) -> Result<StageReport> {
        let started = Instant::now();
        if strategies.is_empty() {
            return Err(Error::ConfigValidation(vec!["recap run needs at least one strategy".into()]));
        }
        let guidance_path = self.guidance_path();
        let split_path = self.split_path();
        let mut missing = Vec::new();
        if strategies.iter().any(|s| s.needs_guidance()) && !guidance_path.exists() {
            missing.push(format!(
                "targeted recaptioning needs guidance assignments: {} not found (run `refsel assign`)",
                guidance_path.display()
            ));
        }
        if !split_path.exists() {
            missing.push(format!("{} not found (run `split make`)", split_path.display()));
        }
        if !missing.is_empty() {
            return Err(Error::ConfigValidation(missing));
        }

        let src_lang = self.config.source()?;
        let split = CorpusSplit::read(&split_path)?;
        let train: HashSet<&str> = split.train_ids.iter().map(String::as_str).collect();
        let src = corpus::ingest_captions(&self.data.captions_src, Some(&src_lang))?;
        let inputs: Vec<CaptionRecord> = src.iter().filter(|c| train.contains(c.image_id.as_str())).cloned().collect();
        let uris: HashMap<String, String> = corpus::ingest_images(&self.data.images)?
            .into_iter()
            .filter_map(|i| i.uri.map(|u| (i.image_id, u)))
            .collect();

        let chat = self.config.endpoints.chat()?;
        let translator = self.config.endpoints.translator()?;
        let mut report = StageReport {
            stage: "recap run".into(),
            inputs: vec![split_path, self.data.captions_src.clone(), self.data.images.clone()],
            seeds: vec![("generation".into(), self.config.generation.seed)],
            ..Default::default()
        };
        let mut guidance = HashMap::new();
        if strategies.iter().any(|s| s.needs_guidance()) {
            let tgt = corpus::ingest_captions(&self.data.captions_native, Some(&self.config.target()?))?;
            let assignments = refsel::read_assignments(&guidance_path)?;
            let resolved = refsel::resolve_assignments(&assignments, &src, &tgt)?;
            let cache = TranslationCache::default();
            guidance =
                recaption::localize_guidance(&resolved, translator.as_ref(), &src_lang, &self.config.translation, &cache)?;
            report.inputs.push(guidance_path);
            report.inputs.push(self.data.captions_native.clone());
        }

        let mut summary = Vec::new();
        for &s in strategies {
            let set = recaption::build_rewrite_set(
                &inputs,
                s,
                &guidance,
                &uris,
                chat.as_ref(),
                &self.config.generation,
                &self.config.recaption,
            )?;
            set.write(&self.layout.rewrites(s), &self.layout.rewrite_failures(s))?;
            let mut sample = set.results.clone();
            sample.shuffle(&mut util::rng_for(self.config.generation.seed, &format!("review/{}", s.tag())));
            sample.truncate(self.config.eval.review_sample);
            util::write_atomic(&self.layout.review_sample(s), &util::to_jsonl(&sample)?)?;
            self.events.emit(
                "recap run",
                "strategy",
                json!({"strategy": s.tag(), "results": set.results.len(), "failures": set.failures.len()}),
            );
            summary.push(format!("{} {}/{}", s.tag(), set.results.len(), set.total));
            report.outputs.extend([
                self.layout.rewrites(s),
                self.layout.rewrite_failures(s),
                self.layout.review_sample(s),
            ]);
        }
        report.summary = format!("rewrites: {}", summary.join(", "));
        Ok(self.finish(report, started))
    }

    pub fn translate(&self, strategies: &[RewriteStrategy]) -> Result<StageReport> {
        let started = Instant::now();
        let missing: Vec<String> = strategies
            .iter()
            .map(|s| self.layout.rewrites(*s))
            .filter(|p| !p.exists())
            .map(|p| format!("{} not found; recaption before translating (run `recap run`)", p.display()))
            .collect();
        if !missing.is_empty() {
            return Err(Error::ConfigValidation(missing));
        }
        let translator = self.config.endpoints.translator()?;
        let (src, tgt) = (self.config.source()?, self.config.target()?);
        let mut report = StageReport {
            stage: "translate run".into(),
            ..Default::default()
        };
        let mut summary = Vec::new();
        for &s in strategies {
            let set: RewriteSet = RewriteSet::read(&self.layout.rewrites(s))?;
            if set.strategy != s {
                return Err(Error::InvalidArgument(format!(
                    "{} holds {} rewrites",
                    self.layout.rewrites(s).display(),
                    set.strategy.tag()
                )));
            }
            let (captions, failures) = recaption::translate_rewrites(
                &set,
                translator.as_ref(),
                &src,
                &tgt,
                &self.config.translation,
                &self.config.recaption,
            )?;
            corpus::write_captions(&self.layout.translated(s), &captions)?;
            util::write_atomic(&self.layout.translate_failures(s), &util::to_jsonl(&failures)?)?;
            summary.push(format!("{} {}", s.tag(), captions.len()));
            report.inputs.push(self.layout.rewrites(s));
            report.outputs.extend([self.layout.translated(s), self.layout.translate_failures(s)]);
        }
        report.summary = format!("translated: {}", summary.join(", "));
        Ok(self.finish(report, started))
    }

    pub fn train(&self, variant: ModelVariant, strategies: &[RewriteStrategy]) -> Result<StageReport> {
        let started = Instant::now();
        let split_path = self.split_path();
        Self::require(&split_path, "run `split make` first")?;
        let split = CorpusSplit::read(&split_path)?;
        let images = EmbeddingStore::read(&self.data.image_embeddings)?;
        let text = EmbeddingStore::read(&self.data.text_features)?;
        let tgt = self.config.target()?;
        let mut inputs = vec![split_path, self.data.image_embeddings.clone(), self.data.text_features.clone()];

        let originals_path = match variant {
            ModelVariant::Native => &self.data.captions_native,
            _ => &self.data.captions_mt,
        };
        let originals = corpus::ingest_captions(originals_path, Some(&tgt))?;
        inputs.push(originals_path.clone());
        let mut rewrites: Vec<CaptionRecord> = Vec::new();
        if variant == ModelVariant::Augmented {
            if strategies.is_empty() {
                return Err(Error::ConfigValidation(vec!["augmented training needs at least one strategy".into()]));
            }
            for &s in strategies {
                let p = self.layout.translated(s);
                Self::require(&p, "run `translate run` first")?;
                rewrites.extend(corpus::ingest_captions(&p, Some(&tgt))?);
                inputs.push(p);
            }
        }
        let pairs = build_pairs(&split.train_ids, &images, &text, &originals, &rewrites)?;
        let pool_size = pairs.iter().map(|p| p.pool.rewrites.len()).max().unwrap_or(0);

        let cfg = &self.config.train;
        let init = ProjectionHead::init(text.dim(), images.dim(), cfg.seed);
        let outcome = if variant == ModelVariant::Untrained {
            TrainOutcome {
                head: init,
                log: Vec::new(),
                steps: 0,
            }
        } else {
            trainer::train(init, &pairs, cfg)?
        };
        for e in &outcome.log {
            self.events.emit(
                "train run",
                "epoch",
                json!({"model": variant.name(), "epoch": e.epoch, "mean_loss": e.mean_loss, "wall_ms": e.wall_ms}),
            );
        }
        let ck = Checkpoint {
            head: outcome.head,
            seed: cfg.seed,
            config_hash: cfg.hash(),
        };
        let ck_path = self.layout.checkpoint(variant);
        trainer::save_checkpoint(&ck, &ck_path)?;
        let log_path = self.layout.train_log(variant);
        trainer::write_log_csv(&log_path, &outcome.log)?;
        self.events.emit(
            "train run",
            "pools",
            json!({"model": variant.name(), "pairs": pairs.len(), "max_rewrites_per_image": pool_size}),
        );
        let loss = match (outcome.log.first(), outcome.log.last()) {
            (Some(a), Some(b)) => format!(", loss {:.4} -> {:.4}", a.mean_loss, b.mean_loss),
            _ => String::new(),
        };
        let report = StageReport {
            stage: format!("train run {}", variant.name()),
            inputs,
            outputs: vec![ck_path, log_path],
            seeds: vec![("train".into(), cfg.seed)],
            summary: format!(
                "{}: {} pairs, pool size {}, {} steps{loss}",
                variant.name(),
                pairs.len(),
                pool_size + 1,
                outcome.steps
            ),
            ..Default::default()
        };
        Ok(self.finish(report, started))
    }

    pub fn eval_retrieve(&self) -> Result<StageReport> {
        let started = Instant::now();
        let split_path = self.split_path();
        let split = CorpusSplit::read(&split_path)?;
        let images = EmbeddingStore::read(&self.data.image_embeddings)?;
        let text = EmbeddingStore::read(&self.data.text_features)?;
        let tgt = self.config.target()?;
        let gold_paths = self.gold_sets();
        let gold: Vec<Vec<CaptionRecord>> = gold_paths
            .iter()
            .map(|p| corpus::ingest_captions(p, Some(&tgt)))
            .collect::<Result<_>>()?;

        let mut models = BTreeMap::new();
        let mut csv = format!("model,gold_set,{}\n", RetrievalReport::CSV_HEADER);
        let mut report = StageReport {
            stage: "eval retrieve".into(),
            inputs: vec![split_path, self.data.image_embeddings.clone(), self.data.text_features.clone()],
            ..Default::default()
        };
        report.inputs.extend(gold_paths.iter().cloned());
        let mut summary = Vec::new();
        for variant in ModelVariant::ALL {
            let ck_path = self.layout.checkpoint(variant);
            if !ck_path.exists() {
                continue;
            }
            let ck = trainer::load_checkpoint(&ck_path)?;
            ck.expect_dims(text.dim(), images.dim())?;
            report.inputs.push(ck_path);
            let mut per_set = Vec::new();
            let mut rank_lines: Vec<RankLine> = Vec::new();
            for (set_idx, captions) in gold.iter().enumerate() {
                let ev = evaluate_head(&ck.head, &images, &text, &split.eval_ids, captions)?;
                csv.push_str(&format!("{},{},{}\n", variant.name(), set_idx, ev.report.csv_row()));
                rank_lines.extend(RankLine::from_rankings(set_idx, Direction::I2t, &ev.i2t));
                rank_lines.extend(RankLine::from_rankings(set_idx, Direction::T2i, &ev.t2i));
                per_set.push(ev.report);
            }
            let mean = RetrievalReport::mean(&per_set).expect("at least one gold set");
            if gold.len() > 1 {
                csv.push_str(&format!("{},mean,{}\n", variant.name(), mean.csv_row()));
            }
            summary.push(format!("{} {:.1}", variant.name(), mean.mean_recall));
            let rpath = self.layout.rankings(variant);
            util::write_atomic(&rpath, &util::to_jsonl(&rank_lines)?)?;
            report.outputs.push(rpath);
            models.insert(variant.name(), json!({"per_set": per_set, "mean": mean}));
        }
        if models.is_empty() {
            return Err(Error::ConfigValidation(vec![format!(
                "no checkpoints under {} (run `train run` first)",
                self.layout.root.join("checkpoints").display()
            )]));
        }
        let doc = json!({
            "gold_sets": gold_paths.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
            "models": models,
        });
        write_json(&self.layout.retrieval_json(), &doc)?;
        util::write_atomic(&self.layout.retrieval_csv(), csv.as_bytes())?;
        report.outputs.extend([self.layout.retrieval_json(), self.layout.retrieval_csv()]);
        report.summary = format!("mean recall: {}", summary.join(", "));
        Ok(self.finish(report, started))
    }

    pub fn eval_errorset(&self) -> Result<StageReport> {
        let started = Instant::now();
        let mut report = StageReport {
            stage: "eval errorset".into(),
            ..Default::default()
        };
        let mut ranks: BTreeMap<ModelVariant, Vec<RankLine>> = BTreeMap::new();
        for v in ModelVariant::ALL {
            let p = self.layout.rankings(v);
            if p.exists() {
                ranks.insert(v, util::read_jsonl(&p)?.into_iter().map(|(_, r)| r).collect());
                report.inputs.push(p);
            }
        }
        for v in [ModelVariant::Native, ModelVariant::Mt] {
            if !ranks.contains_key(&v) {
                return Err(Error::ConfigValidation(vec![format!(
                    "{} not found; error sets need native and mt rankings (train both, then `eval retrieve`)",
                    self.layout.rankings(v).display()
                )]));
            }
        }
        let n_sets = ranks[&ModelVariant::Native].iter().map(|r| r.set + 1).max().unwrap_or(0);
        let mut sets_doc = Vec::new();
        let mut restricted: BTreeMap<&str, Vec<Option<RetrievalReport>>> = BTreeMap::new();
        for set in 0..n_sets {
            let pick = |v: ModelVariant, d: Direction| RankLine::select(&ranks[&v], set, d);
            let e_i2t = eval::build_error_set(&pick(ModelVariant::Native, Direction::I2t), &pick(ModelVariant::Mt, Direction::I2t), Direction::I2t)?;
            let e_t2i = eval::build_error_set(&pick(ModelVariant::Native, Direction::T2i), &pick(ModelVariant::Mt, Direction::T2i), Direction::T2i)?;
            for v in ranks.keys() {
                let r = if e_i2t.is_empty() || e_t2i.is_empty() {
                    None
                } else {
                    Some(eval::restricted_report(&pick(*v, Direction::I2t), &pick(*v, Direction::T2i), &e_i2t, &e_t2i)?)
                };
                restricted.entry(v.name()).or_default().push(r);
            }
            sets_doc.push(json!({
                "gold_set": set,
                "counts": format!("{}/{}", e_i2t.len(), e_t2i.len()),
                "i2t": e_i2t,
                "t2i": e_t2i,
            }));
        }
        let restricted_doc: BTreeMap<&str, Value> = restricted
            .iter()
            .map(|(k, per_set)| {
                let present: Vec<RetrievalReport> = per_set.iter().flatten().copied().collect();
                (*k, json!({"per_set": per_set, "mean": RetrievalReport::mean(&present)}))
            })
            .collect();
        write_json(&self.layout.errorsets_json(), &json!({"sets": sets_doc}))?;
        write_json(&self.layout.restricted_json(), &json!({"models": restricted_doc}))?;
        report.outputs.extend([self.layout.errorsets_json(), self.layout.restricted_json()]);
        report.summary = format!(
            "error-set sizes (i2t/t2i): {}",
            sets_doc.iter().map(|s| s["counts"].as_str().unwrap_or("").to_string()).collect::<Vec<_>>().join(", ")
        );
        Ok(self.finish(report, started))
    }

    /// Every stage in order: synthesize (if configured), split, select
    /// guidance, recaption, translate, train, evaluate.
    pub fn all(&self) -> Result<Vec<StageReport>> {
        let mut out = Vec::new();
        if self.config.synthetic.is_some() {
            out.push(self.synth()?);
        }
        if self.config.paths.split.is_none() {
            out.push(self.split()?);
        }
        let strategies = &self.config.strategies;
        if self.config.paths.guidance.is_none() && strategies.iter().any(|s| s.needs_guidance()) {
            out.push(self.refsel_assign()?);
        }
        if !strategies.is_empty() {
            out.push(self.recap(strategies)?);
            out.push(self.translate(strategies)?);
        }
        for v in ModelVariant::ALL {
            if v == ModelVariant::Augmented && strategies.is_empty() {
                continue;
            }
            out.push(self.train(v, strategies)?);
        }
        out.push(self.eval_retrieve()?);
        out.push(self.eval_errorset()?);
        Ok(out)
    }
}

/// One rank record as stored in the rankings files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankLine {
    pub set: usize,
    pub direction: Direction,
    pub query_id: String,
    pub rank_of_gold: usize,
}

impl RankLine {
    fn from_rankings(set: usize, direction: Direction, r: &[RankingResult]) -> impl Iterator<Item = RankLine> + '_ {
        r.iter().map(move |x| RankLine {
            set,
            direction,
            query_id: x.query_id.clone(),
            rank_of_gold: x.rank_of_gold,
        })
    }

    fn select(lines: &[RankLine], set: usize, direction: Direction) -> Vec<RankingResult> {
        lines
            .iter()
            .filter(|l| l.set == set && l.direction == direction)
            .map(|l| RankingResult {
                query_id: l.query_id.clone(),
                ranked_gallery_ids: Vec::new(),
                rank_of_gold: l.rank_of_gold,
            })
            .collect()
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    util::write_atomic(path, &bytes)
}

/// Training pairs for `image_ids`: the first caption of each image in
/// `originals` is the original positive; every caption in `rewrites` for the
/// image joins its augmentation pool. Text features are looked up by
/// caption id.
pub fn build_pairs(
    image_ids: &[String],
    images: &EmbeddingStore,
    text: &EmbeddingStore,
    originals: &[CaptionRecord],
    rewrites: &[CaptionRecord],
) -> Result<Vec<AlignedPair>> {
    let mut first: HashMap<&str, &CaptionRecord> = HashMap::new();
    for c in originals {
        first.entry(c.image_id.as_str()).or_insert(c);
    }
    let mut extra: HashMap<&str, Vec<&CaptionRecord>> = HashMap::new();
    for c in rewrites {
        extra.entry(c.image_id.as_str()).or_default().push(c);
    }
    let feature = |id: &str| text.get_f64(id).ok_or_else(|| Error::MissingId(format!("text feature for caption {id}")));
    image_ids
        .iter()
        .map(|id| {
            let image_vector = images.get_f64(id).ok_or_else(|| Error::MissingId(id.clone()))?;
            let orig = first
                .get(id.as_str())
                .ok_or_else(|| Error::MissingCaption {
                    image_id: id.clone(),
                    which: "training",
                })?;
            let pool_rewrites = extra
                .get(id.as_str())
                .map(|v| v.iter().map(|c| feature(&c.caption_id)).collect::<Result<Vec<_>>>())
                .transpose()?
                .unwrap_or_default();
            Ok(AlignedPair {
                image_id: id.clone(),
                image_vector,
                pool: AugmentationPool::new(feature(&orig.caption_id)?, pool_rewrites)?,
            })
        })
        .collect()
}

/// Retrieval of one gold caption set against the given images.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: RetrievalReport,
    pub i2t: Vec<RankingResult>,
    pub t2i: Vec<RankingResult>,
}

/// Project each gold caption through `head` and rank both directions over
/// `image_ids`. Each image needs exactly one caption in `gold`.
pub fn evaluate_head(
    head: &ProjectionHead,
    images: &EmbeddingStore,
    text: &EmbeddingStore,
    image_ids: &[String],
    gold: &[CaptionRecord],
) -> Result<Evaluation> {
    let wanted: HashSet<&str> = image_ids.iter().map(String::as_str).collect();
    let caps: Vec<&CaptionRecord> = gold.iter().filter(|c| wanted.contains(c.image_id.as_str())).collect();
    let covered: HashSet<&str> = caps.iter().map(|c| c.image_id.as_str()).collect();
    if let Some(id) = image_ids.iter().find(|id| !covered.contains(id.as_str())) {
        return Err(Error::MissingCaption {
            image_id: id.clone(),
            which: "gold",
        });
    }
    let image_vecs = image_ids
        .iter()
        .map(|id| images.get_f64(id).ok_or_else(|| Error::MissingId(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let text_vecs = caps
        .iter()
        .map(|c| {
            let f = text
                .get_f64(&c.caption_id)
                .ok_or_else(|| Error::MissingId(format!("text feature for caption {}", c.caption_id)))?;
            head.project(&f)
        })
        .collect::<Result<Vec<_>>>()?;
    let img_items: Vec<eval::Item<'_>> = image_ids.iter().zip(&image_vecs).map(|(i, v)| (i.as_str(), v.as_slice())).collect();
    let cap_items: Vec<(&str, &str, &[f64])> = caps
        .iter()
        .zip(&text_vecs)
        .map(|(c, v)| (c.caption_id.as_str(), c.image_id.as_str(), v.as_slice()))
        .collect();
    let (i2t, t2i) = eval::rank_both(&img_items, &cap_items)?;
    let report = eval::recall_report(&i2t, &t2i)?;
    Ok(Evaluation { report, i2t, t2i })
}

/// Train a head from `pairs` under `config` starting at the seeded init.
pub fn train_head(pairs: &[AlignedPair], d_text: usize, d_joint: usize, config: &TrainConfig) -> Result<TrainOutcome> {
    trainer::train(ProjectionHead::init(d_text, d_joint, config.seed), pairs, config)
}
