//! `proactive`: build artifacts, inspect expansions, run the simulation
//! suite and serve live recommendations.
//!
//! Artifact layout written by `ingest` and read by the other verbs:
//!
//! ```text
//! <dir>/docs.jsonl   the ingested corpus, one document per line
//! <dir>/vocab.txt    vocabulary
//! <dir>/stats.txt    document frequencies and N
//! <dir>/index.json   inverted index
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use proactive_core::beam::{
    beam_expand, score_candidates, BeamParams, DEFAULT_BEAM_WIDTH, DEFAULT_BRANCHING, DEFAULT_DEPTH, DEFAULT_N_EXP,
};
use proactive_core::corpus::{tokenize, Corpus, CorpusStats, Vocabulary};
use proactive_core::index::{InvertedIndex, WeightedQuery, DEFAULT_TOP_K};
use proactive_core::intent::{
    linrel_expand, sample_columns, LinRel, RelevanceState, TermDocMatrix, DEFAULT_C, DEFAULT_MU, DEFAULT_SAMPLE,
    DEFAULT_TAU,
};
use proactive_core::lm::ngram::{DEFAULT_ALPHA, DEFAULT_ORDER};
use proactive_core::lm::{LanguageModel, LstmConfig, LstmModel, NGramModel, NextWordModel};
use proactive_core::proactive::ExpanderChoice;
use proactive_core::sim::{synth_corpus, write_suite, SimResources, SuiteConfig, SynthConfig, Task};
use proactive_core::stopwords::StopWords;
use proactive_service::{AppState, Engine, DEFAULT_IDLE_TIMEOUT};
use serde::{Deserialize, Serialize};

const DOCS_FILE: &str = "docs.jsonl";
const VOCAB_FILE: &str = "vocab.txt";
const STATS_FILE: &str = "stats.txt";
const INDEX_FILE: &str = "index.json";

#[derive(Parser)]
#[command(name = "proactive", version, about = "Proactive information retrieval from written context")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a JSONL corpus and write vocabulary, statistics and index.
    Ingest(IngestArgs),
    /// Rank documents for a bag of words.
    Query(QueryArgs),
    /// Train a next-word model on an ingested corpus.
    TrainLm(TrainLmArgs),
    /// Print beam-search expansion candidates for a context.
    Expand(ExpandArgs),
    /// Print intent-model expansion candidates for a context window.
    IntentExpand(IntentExpandArgs),
    /// Run the simulated exploratory and known-item experiments.
    Simulate(SimulateArgs),
    /// Serve the session API over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic topic corpus as JSONL.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    vocab_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Ngram,
    Lstm,
}

#[derive(Args)]
struct TrainLmArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Directory written by `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 35)]
    unroll: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Perplexity log; defaults to the model path with a `.perplexity.csv` suffix.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory written by `ingest`.
    #[arg(long)]
    stats: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long, default_value_t = DEFAULT_BRANCHING)]
    b: usize,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    d: usize,
    #[arg(long, default_value_t = DEFAULT_N_EXP)]
    n_exp: usize,
}

#[derive(Args)]
struct IntentExpandArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE)]
    sample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_N_EXP)]
    n_exp: usize,
    #[arg(long)]
    text: String,
    /// Where to record the sampled document ids; defaults to
    /// `<index>/sample-m<M>-seed<s>.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated tasks: exploratory, known-item.
    #[arg(long, default_value = "exploratory,known-item")]
    task: String,
    /// Comma-separated methods: baseline, lm, intent.
    #[arg(long, default_value = "baseline,lm,intent")]
    method: String,
    /// Directory written by `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    /// Use this trained model for the lm method instead of a fresh n-gram model.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "3,5,10,20,40")]
    n_grid: String,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLE)]
    sample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    topics: usize,
    #[arg(long, default_value_t = 40)]
    docs_per_topic: usize,
    #[arg(long, default_value_t = 500)]
    vocab_size: usize,
    #[arg(long, default_value_t = 60)]
    length: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Record of the documents behind an intent-model matrix.
#[derive(Debug, Serialize, Deserialize)]
struct SampleManifest {
    sample: usize,
    seed: u64,
    doc_ids: Vec<String>,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    match Cli::parse().command {
        Command::Ingest(a) => ingest(a),
        Command::Query(a) => query(a),
        Command::TrainLm(a) => train_lm(a),
        Command::Expand(a) => expand(a),
        Command::IntentExpand(a) => intent_expand(a),
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve(a),
        Command::Synth(a) => synth(a),
    }
}

fn load_corpus(dir: &Path) -> Result<Corpus> {
    Ok(Corpus::load_jsonl(&dir.join(DOCS_FILE))?)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let corpus = Corpus::load_jsonl(&a.input)?;
    let vocab = Vocabulary::build(corpus.docs(), a.vocab_size)?;
    let stats = CorpusStats::compute(corpus.docs());
    let index = InvertedIndex::build(corpus.docs(), &stats)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    corpus.save_jsonl(&a.out.join(DOCS_FILE))?;
    vocab.save(&a.out.join(VOCAB_FILE))?;
    stats.save(&a.out.join(STATS_FILE))?;
    index.save(&a.out.join(INDEX_FILE))?;
    eprintln!(
        "ingested {} documents: {} vocabulary entries, {} distinct terms",
        corpus.len(),
        vocab.len(),
        stats.num_terms()
    );
    Ok(())
}

fn query(a: QueryArgs) -> Result<()> {
    let index = InvertedIndex::load(&a.index.join(INDEX_FILE))?;
    let q = WeightedQuery::from_words(&tokenize(&a.text));
    let out = io::stdout();
    let mut out = out.lock();
    for (rank, hit) in index.search(&q, a.top_k).hits.iter().enumerate() {
        writeln!(out, "{}\t{}\t{:.6}", rank + 1, hit.doc_id, hit.score)?;
    }
    Ok(())
}

fn train_lm(a: TrainLmArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let vocab = Vocabulary::load(&a.corpus.join(VOCAB_FILE))?;
    let (model, perplexity) = match a.model {
        ModelKind::Ngram => {
            let m = NGramModel::train(corpus.docs(), &vocab, a.order, a.alpha)?;
            let ppl = m.perplexity(corpus.docs())?;
            (LanguageModel::NGram(m), vec![ppl])
        }
        ModelKind::Lstm => {
            let cfg = LstmConfig {
                layers: a.layers,
                hidden: a.hidden,
                embed: a.hidden,
                unroll: a.unroll,
                seed: a.seed,
                ..LstmConfig::default()
            };
            let mut m = LstmModel::new(vocab.clone(), cfg)?;
            let stream = vocab.token_stream(corpus.docs());
            let report = m.train(&stream, a.epochs, a.lr, a.unroll)?;
            (LanguageModel::Lstm(m), report.perplexity)
        }
    };
    model.save(&a.out)?;
    let log = a.log.unwrap_or_else(|| a.out.with_extension("perplexity.csv"));
    let mut csv = String::from("epoch,perplexity\n");
    for (epoch, p) in perplexity.iter().enumerate() {
        csv.push_str(&format!("{},{p:.6}\n", epoch + 1));
    }
    fs::write(&log, csv).with_context(|| format!("writing {}", log.display()))?;
    eprintln!("saved {} model to {}; final perplexity {:.3}", model.kind(), a.out.display(), perplexity.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn expand(a: ExpandArgs) -> Result<()> {
    let model = LanguageModel::load(&a.model)?;
    let stats = CorpusStats::load(&a.stats.join(STATS_FILE))?;
    let context = tokenize(&a.text);
    let params = BeamParams { b: a.b, k: a.k, d: a.d };
    let tree = beam_expand(&model, &model.vocab().encode(&context), params)?;
    let terms = score_candidates(&tree, model.vocab(), &stats, StopWords::english(), &context);
    let out = io::stdout();
    let mut out = out.lock();
    for t in terms.iter().take(a.n_exp) {
        writeln!(
            out,
            "{}\t{:.6e}\t{:.6e}\t{:.6}\t{:.6e}\t{}",
            t.word,
            t.prob,
            t.path_score,
            t.idf,
            t.score,
            t.path.join(" ")
        )?;
    }
    Ok(())
}

fn intent_expand(a: IntentExpandArgs) -> Result<()> {
    let corpus = load_corpus(&a.index)?;
    let stats = CorpusStats::load(&a.index.join(STATS_FILE))?;
    let cols = sample_columns(corpus.len(), a.sample, a.seed);
    let manifest = SampleManifest {
        sample: a.sample,
        seed: a.seed,
        doc_ids: cols.iter().map(|&c| corpus.docs()[c].id.clone()).collect(),
    };
    let manifest_path = a
        .manifest
        .unwrap_or_else(|| a.index.join(format!("sample-m{}-seed{}.json", a.sample, a.seed)));
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    let stopwords = StopWords::english();
    let matrix = TermDocMatrix::build(corpus.docs(), &cols, &stats, stopwords)?;
    let linrel = LinRel::new(matrix, a.mu)?;
    let window = tokenize(&a.text);
    let mut state = RelevanceState::new(linrel.matrix().num_words(), a.tau);
    state.update(linrel.matrix(), &window);
    let solution = linrel.solve(state.y())?;
    let terms = linrel_expand(linrel.matrix(), &solution, &window, a.n_exp, a.c, stopwords);
    let out = io::stdout();
    let mut out = out.lock();
    for t in terms {
        writeln!(out, "{}\t{:.6}\t{:.6}\t{:.6}", t.word, t.y_hat, t.sigma, t.v)?;
    }
    Ok(())
}

fn parse_list<T>(raw: &str, what: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let items = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} {s:?}: {e}")))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        bail!("no {what} given");
    }
    Ok(items)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = SuiteConfig {
        tasks: parse_list::<Task>(&a.task, "task")?,
        methods: parse_list::<ExpanderChoice>(&a.method, "method")?,
        n_grid: parse_list::<usize>(&a.n_grid, "context size")?,
        trials: a.trials,
        seed: a.seed,
        ..SuiteConfig::default()
    };
    let corpus = load_corpus(&a.corpus)?;
    let needs_expanders = cfg.methods.iter().any(|&m| m != ExpanderChoice::Baseline);
    let mut res = if needs_expanders {
        SimResources::full(corpus, a.seed)?
    } else {
        SimResources::baseline(corpus)?
    };
    if let Some(path) = &a.model {
        res.model = Some(LanguageModel::load(path)?);
    }
    let report = res.env(StopWords::english(), cfg.sim.clone()).run_suite(&cfg);
    write_suite(&report, &cfg, &a.out)?;
    for e in &report.errors {
        eprintln!("cell failed: {e}");
    }
    eprintln!("wrote {} report rows to {}", report.rows.len(), a.out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let corpus = load_corpus(&a.index)?;
    let stats = CorpusStats::load(&a.index.join(STATS_FILE))?;
    let index = InvertedIndex::load(&a.index.join(INDEX_FILE))?;
    let cols = sample_columns(corpus.len(), a.sample, a.seed);
    let matrix = TermDocMatrix::build(corpus.docs(), &cols, &stats, StopWords::english())?;
    let linrel = LinRel::new(matrix, DEFAULT_MU)?;
    let mut engine = Engine::new(corpus, stats, index).with_linrel(linrel);
    if let Some(path) = &a.model {
        engine = engine.with_model(LanguageModel::load(path)?);
    }
    let state = AppState::new(engine, DEFAULT_IDLE_TIMEOUT);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        proactive_service::serve(listener, state).await?;
        Ok(())
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        topics: a.topics,
        docs_per_topic: a.docs_per_topic,
        vocab_size: a.vocab_size,
        doc_length: a.length,
        seed: a.seed,
        ..SynthConfig::default()
    };
    synth_corpus(&cfg)?.save_jsonl(&a.out)?;
    Ok(())
}
