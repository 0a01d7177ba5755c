//! `xrecap` command-line entry point.
//!
//! Settings come from a TOML config; command-line flags override it.
//! Without `--config` the bundled synthetic configuration is used with its
//! run directory under the current directory. Progress summaries go to
//! stderr, structured events to `<run>/events.jsonl`, and every mutating
//! command writes `<run>/manifests/<command>.json`. On failure one JSON line
//! `{"error": <class>, "message": ..., "problems": [...]}` goes to stderr.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use xrecap::corpus::{self, CorpusSplit, EmbeddingStore};
use xrecap::eval::{self, RougeVariant};
use xrecap::pipeline::{self, ModelVariant, PipelineConfig, Run, RunManifest, StageReport};
use xrecap::recaption::RewriteStrategy;
use xrecap::refsel::NnIndex;
use xrecap::termlens::{self, ExtractMode, LemmaAliases, SupercategorySet, Taxonomy, TermDistribution};
use xrecap::{util, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "xrecap", version, about = "Cross-lingual recaptioning toolkit")]
struct Cli {
    /// Pipeline config (TOML). Defaults to the bundled synthetic config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory, overriding `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for splitting, guidance sampling, training and synthesis.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus files.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Reference/train/eval partition.
    #[command(subcommand)]
    Split(SplitCmd),
    /// Guidance example selection.
    #[command(subcommand)]
    Refsel(RefselCmd),
    /// LLM rewriting of training captions.
    #[command(subcommand)]
    Recap(StrategyCmd),
    /// Machine translation of rewrites.
    #[command(subcommand)]
    Translate(StrategyCmd),
    /// Projection head training.
    #[command(subcommand)]
    Train(TrainCmd),
    /// Retrieval and caption evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Object-term distributions.
    #[command(subcommand)]
    Terms(TermsCmd),
    /// Every stage in order.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand, Debug)]
enum CorpusCmd {
    /// Validate the configured corpus files and record their digests.
    Ingest,
    /// Generate the synthetic corpus into the run directory.
    Synth,
}

#[derive(Subcommand, Debug)]
enum SplitCmd {
    /// Write `split.json`.
    Make,
}

#[derive(Subcommand, Debug)]
enum RefselCmd {
    /// Select a guidance example for every training image.
    Assign,
    /// Print the nearest neighbors of one vector as JSON.
    Query {
        /// Embedding store holding the index and query vectors.
        #[arg(long)]
        index: PathBuf,
        /// Split file; the index covers its reference ids. Defaults to every
        /// id except the query.
        #[arg(long)]
        ids: Option<PathBuf>,
        /// Id of the query vector in the store.
        #[arg(long)]
        query_id: String,
        /// Number of neighbors.
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
}

#[derive(Args, Debug)]
struct StrategyArgs {
    /// Strategies (`paraphrase`, `diverse`, `targeted`), overriding the config.
    #[arg(long = "strategy", value_delimiter = ',')]
    strategies: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum StrategyCmd {
    Run(StrategyArgs),
}

#[derive(Subcommand, Debug)]
enum TrainCmd {
    Run {
        /// `untrained`, `mt`, `augmented` or `native`.
        #[arg(long, default_value = "augmented")]
        variant: String,
        #[command(flatten)]
        strategies: StrategyArgs,
    },
}

#[derive(Subcommand, Debug)]
enum EvalCmd {
    /// Rank every checkpoint in the run against each gold set.
    Retrieve,
    /// Native-vs-MT error sets and restricted recall.
    Errorset,
    /// ROUGE F1 of candidate captions against references with the same image.
    Rouge {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
    },
}

#[derive(Args, Debug)]
struct TermArgs {
    /// Hypernym/lemma file. Defaults to `paths.taxonomy` from the config.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Supercategory names, comma separated.
    #[arg(long, value_delimiter = ',')]
    supercategories: Vec<String>,
    /// Lemma alias file (`alias<TAB>canonical`).
    #[arg(long)]
    aliases: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum TermsCmd {
    /// Noun counts per supercategory for one caption file, as JSON.
    Analyze {
        /// Caption file (JSONL).
        #[arg(long)]
        captions: PathBuf,
        /// Tagged tokens; lexicon matching is used without it.
        #[arg(long)]
        pretagged: Option<PathBuf>,
        /// List terms counted more than this many times.
        #[arg(long, default_value_t = 0)]
        min_count: usize,
        #[command(flatten)]
        terms: TermArgs,
    },
    /// Per-supercategory CSV tables comparing two caption files.
    Compare {
        /// First caption file (the ratio numerator).
        #[arg(long)]
        a: PathBuf,
        /// Second caption file (the ratio denominator).
        #[arg(long)]
        b: PathBuf,
        /// Tagged tokens for `--a`.
        #[arg(long)]
        pretagged_a: Option<PathBuf>,
        /// Tagged tokens for `--b`.
        #[arg(long)]
        pretagged_b: Option<PathBuf>,
        /// Keep terms counted more than this many times in either file.
        #[arg(long, default_value_t = 0)]
        union_threshold: usize,
        /// Directory for the CSV tables and manifest.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        terms: TermArgs,
    },
}

#[derive(Subcommand, Debug)]
enum PipelineCmd {
    All,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let problems = match &e {
                Error::ConfigValidation(p) => p.clone(),
                other => vec![other.to_string()],
            };
            let line = json!({"error": e.class(), "message": e.to_string(), "problems": problems});
            eprintln!("{line}");
            ExitCode::from(if matches!(e, Error::ConfigValidation(_)) { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let mut c = PipelineConfig::from_toml(pipeline::SYNTHETIC_CONFIG)?;
            c.out_dir = PathBuf::from("runs/synthetic");
            c
        }
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.split.seed = seed;
        cfg.refsel.seed = seed;
        cfg.train.seed = seed;
        if let Some(s) = cfg.synthetic.as_mut() {
            s.seed = seed;
        }
    }
    Ok(cfg)
}

fn strategies(args: &StrategyArgs, cfg: &PipelineConfig) -> Result<Vec<RewriteStrategy>> {
    if args.strategies.is_empty() {
        return Ok(cfg.strategies.clone());
    }
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for s in &args.strategies {
        match pipeline::parse_strategy(s) {
            Ok(s) if !out.contains(&s) => out.push(s),
            Ok(_) => {}
            Err(e) => problems.push(e.to_string()),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::ConfigValidation(problems))
    }
}

/// Run stages, then write the command's manifest and a summary.
fn staged(run: &Run, command: &str, f: impl FnOnce(&Run) -> Result<Vec<StageReport>>) -> Result<()> {
    let reports = f(run)?;
    for r in &reports {
        eprintln!("[{}] {} ({} ms)", r.stage, r.summary, r.elapsed_ms);
    }
    let manifest = run.manifest(command, &reports)?;
    let path = run.layout.manifest(command);
    manifest.write(&path)?;
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Terms(cmd) => return terms(&cli, cmd),
        Command::Refsel(RefselCmd::Query {
            index,
            ids,
            query_id,
            k,
        }) => return refsel_query(index, ids.as_deref(), query_id, *k),
        Command::Eval(EvalCmd::Rouge { candidates, references }) => return rouge(candidates, references),
        _ => {}
    }
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Recap(StrategyCmd::Run(a)) | Command::Translate(StrategyCmd::Run(a)) => {
            let s = strategies(a, &cfg)?;
            if s.is_empty() {
                return Err(Error::ConfigValidation(vec!["strategy list is empty".into()]));
            }
        }
        _ => {}
    }
    let run = Run::new(cfg)?;
    match &cli.command {
        Command::Corpus(CorpusCmd::Ingest) => ingest(&run),
        Command::Corpus(CorpusCmd::Synth) => staged(&run, "corpus synth", |r| Ok(vec![r.synth()?])),
        Command::Split(SplitCmd::Make) => staged(&run, "split make", |r| Ok(vec![r.split()?])),
        Command::Refsel(RefselCmd::Assign) => staged(&run, "refsel assign", |r| Ok(vec![r.refsel_assign()?])),
        Command::Recap(StrategyCmd::Run(a)) => {
            let s = strategies(a, &run.config)?;
            staged(&run, "recap run", |r| Ok(vec![r.recap(&s)?]))
        }
        Command::Translate(StrategyCmd::Run(a)) => {
            let s = strategies(a, &run.config)?;
            staged(&run, "translate run", |r| Ok(vec![r.translate(&s)?]))
        }
        Command::Train(TrainCmd::Run { variant, strategies: a }) => {
            let v = ModelVariant::parse(variant).ok_or_else(|| {
                Error::ConfigValidation(vec![format!(
                    "unknown variant {variant:?} (expected untrained, mt, augmented or native)"
                )])
            })?;
            let s = strategies(a, &run.config)?;
            staged(&run, &format!("train run {}", v.name()), |r| Ok(vec![r.train(v, &s)?]))
        }
        Command::Eval(EvalCmd::Retrieve) => staged(&run, "eval retrieve", |r| Ok(vec![r.eval_retrieve()?])),
        Command::Eval(EvalCmd::Errorset) => staged(&run, "eval errorset", |r| Ok(vec![r.eval_errorset()?])),
        Command::Pipeline(PipelineCmd::All) => staged(&run, "pipeline all", Run::all),
        Command::Terms(_) | Command::Refsel(RefselCmd::Query { .. }) | Command::Eval(EvalCmd::Rouge { .. }) => {
            unreachable!("handled above")
        }
    }
}

fn ingest(run: &Run) -> Result<()> {
    let d = &run.data;
    let images = corpus::ingest_images(&d.images)?;
    let image_store = corpus::ingest_embeddings(&d.image_embeddings)?;
    let text_store = corpus::ingest_embeddings(&d.text_features)?;
    let mut problems = Vec::new();
    for img in &images {
        if !image_store.contains(&img.image_id) {
            problems.push(format!("image {} has no embedding", img.image_id));
        }
    }
    let (src, tgt) = (run.config.source()?, run.config.target()?);
    let mut counts = BTreeMap::new();
    for (name, path, lang) in [
        ("captions_src", &d.captions_src, &src),
        ("captions_mt", &d.captions_mt, &tgt),
        ("captions_native", &d.captions_native, &tgt),
    ] {
        let caps = corpus::ingest_captions(path, Some(lang))?;
        corpus::check_image_refs(&caps, &images)?;
        if name != "captions_src" {
            problems.extend(
                caps.iter()
                    .filter(|c| !text_store.contains(&c.caption_id))
                    .take(5)
                    .map(|c| format!("{name}: caption {} has no text feature", c.caption_id)),
            );
        }
        counts.insert(name, caps.len());
    }
    if !problems.is_empty() {
        return Err(Error::ConfigValidation(problems));
    }
    let mut m = RunManifest::new("corpus ingest", &run.config.hash());
    for p in d.all() {
        m.add_input(p.to_string_lossy().into_owned(), p)?;
    }
    let path = run.layout.manifest("corpus ingest");
    m.write(&path)?;
    let summary = json!({
        "images": images.len(),
        "image_dim": image_store.dim(),
        "text_vectors": text_store.len(),
        "text_dim": text_store.dim(),
        "captions": counts,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn refsel_query(index: &Path, ids: Option<&Path>, query_id: &str, k: usize) -> Result<()> {
    let store = EmbeddingStore::read(index)?;
    let members: Vec<String> = match ids {
        Some(p) => CorpusSplit::read(p)?.reference_ids,
        None => store.ids().iter().filter(|id| *id != query_id).cloned().collect(),
    };
    let nn = NnIndex::build(&store, &members)?;
    if nn.contains(query_id) {
        return Err(Error::QueryInReferenceSet(query_id.to_string()));
    }
    let v = store.get_f64(query_id).ok_or_else(|| Error::MissingId(query_id.to_string()))?;
    let hits = nn.query(&v, k)?;
    println!("{}", serde_json::to_string_pretty(&json!({"query_id": query_id, "k": k, "neighbors": hits}))?);
    Ok(())
}

fn rouge(candidates: &Path, references: &Path) -> Result<()> {
    let cands = corpus::ingest_captions(candidates, None)?;
    let refs = corpus::ingest_captions(references, None)?;
    let by_image = corpus::by_image(&refs);
    let items: Vec<(&str, Vec<&str>)> = cands
        .iter()
        .map(|c| {
            let r = by_image
                .get(c.image_id.as_str())
                .map(|v| v.iter().map(|r| r.text.as_str()).collect())
                .unwrap_or_default();
            (c.text.as_str(), r)
        })
        .collect();
    let scored = items.iter().filter(|(_, r)| !r.is_empty()).count();
    let scores: BTreeMap<&str, f64> = eval::rouge_multi(&items).into_iter().map(|(v, s)| (RougeVariant::name(v), s)).collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({"candidates": cands.len(), "scored": scored, "f1": scores}))?
    );
    Ok(())
}

struct TermContext {
    taxonomy: Taxonomy,
    supercats: SupercategorySet,
    aliases: Option<LemmaAliases>,
}

fn term_context(cli: &Cli, args: &TermArgs) -> Result<TermContext> {
    let path = match &args.taxonomy {
        Some(p) => p.clone(),
        None => {
            let from_cfg = match &cli.config {
                Some(c) => PipelineConfig::load(c)?.paths.taxonomy,
                None => None,
            };
            from_cfg.ok_or_else(|| {
                Error::ConfigValidation(vec!["a taxonomy is required (--taxonomy or paths.taxonomy)".into()])
            })?
        }
    };
    let taxonomy = Taxonomy::load(&path)?;
    let supercats = if args.supercategories.is_empty() {
        SupercategorySet::from_names(&termlens::DEFAULT_SUPERCATEGORIES, &taxonomy)?
    } else {
        SupercategorySet::from_names(&args.supercategories, &taxonomy)?
    };
    let aliases = args.aliases.as_deref().map(LemmaAliases::load).transpose()?;
    Ok(TermContext {
        taxonomy,
        supercats,
        aliases,
    })
}

fn term_distribution(ctx: &TermContext, captions: &Path, pretagged: Option<&Path>, min_count: usize) -> Result<TermDistribution> {
    let caps = corpus::ingest_captions(captions, None)?;
    let tagged: Option<HashMap<_, _>> = pretagged.map(termlens::read_pretagged).transpose()?;
    let mode = if tagged.is_some() { ExtractMode::Pretagged } else { ExtractMode::Lexicon };
    let nouns = termlens::extract_corpus(&caps, mode, tagged.as_ref(), &ctx.taxonomy)?;
    Ok(termlens::distribution(&nouns, &ctx.taxonomy, &ctx.supercats, ctx.aliases.as_ref(), min_count))
}

fn terms(cli: &Cli, cmd: &TermsCmd) -> Result<()> {
    match cmd {
        TermsCmd::Analyze {
            captions,
            pretagged,
            min_count,
            terms,
        } => {
            let ctx = term_context(cli, terms)?;
            let d = term_distribution(&ctx, captions, pretagged.as_deref(), *min_count)?;
            let report: Vec<_> = d
                .report()
                .into_iter()
                .map(|(name, terms)| json!({"supercategory": name, "terms": terms.into_iter().collect::<BTreeMap<_, _>>()}))
                .collect();
            let out = json!({
                "total_nouns": d.total_nouns,
                "mapped": d.mapped_count(),
                "unmapped": d.unmapped_count,
                "unmatched": d.unmatched_count,
                "min_count": d.min_count,
                "supercategories": report,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        TermsCmd::Compare {
            a,
            b,
            pretagged_a,
            pretagged_b,
            union_threshold,
            out_dir,
            terms,
        } => {
            let ctx = term_context(cli, terms)?;
            let da = term_distribution(&ctx, a, pretagged_a.as_deref(), *union_threshold)?;
            let db = term_distribution(&ctx, b, pretagged_b.as_deref(), *union_threshold)?;
            let rows = termlens::compare(&da, &db, *union_threshold)?;
            let names: Vec<String> = ctx.supercats.names().map(String::from).collect();
            let written = termlens::write_comparison_csv(out_dir, &rows, &names)?;
            let mut m = RunManifest::new("terms compare", &util::sha256_hex(format!("{union_threshold}").as_bytes()));
            for p in [Some(a), Some(b), pretagged_a.as_ref(), pretagged_b.as_ref()].into_iter().flatten() {
                m.add_input(p.to_string_lossy().into_owned(), p)?;
            }
            for p in &written {
                m.add_output(p.file_name().unwrap_or_default().to_string_lossy().into_owned(), p)?;
            }
            m.write(&out_dir.join("manifest.json"))?;
            for r in rows.iter().filter(|r| r.flagged || r.ratio >= 2.0 || r.ratio <= 0.5) {
                eprintln!("{}: {} {} vs {} (ratio {})", r.supercategory, r.term, r.count_a, r.count_b, r.ratio_text());
            }
            eprintln!("wrote {} tables to {}", written.len(), out_dir.display());
            Ok(())
        }
    }
}
