//! Simulated proactive-search sessions.
//!
//! Both tasks pick input documents at random under the run seed and slide
//! every length-`n` window over each document's token stream, issuing one
//! proactive query per window with the input document excluded from
//! retrieval. The per-document metric is the mean over its windows; the
//! reported metric is the mean over documents.
//!
//! - Exploratory: precision of the top `k` results, a result being relevant
//!   when it shares at least one topic with the input document.
//! - Known item: the target is the best match for the whole input document
//!   among the remaining documents; a window scores 1 when the target is in
//!   its top `k`.

pub mod plot;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{BeamParams, DEFAULT_N_EXP};
use crate::corpus::{Corpus, CorpusStats};
use crate::error::{Error, Result};
use crate::index::{InvertedIndex, WeightedQuery, DEFAULT_TOP_K};
use crate::corpus::Vocabulary;
use crate::intent::{sample_columns, LinRel, TermDocMatrix, DEFAULT_C, DEFAULT_MU, DEFAULT_SAMPLE, DEFAULT_TAU};
use crate::lm::ngram::{DEFAULT_ALPHA, DEFAULT_ORDER};
use crate::lm::{LanguageModel, NGramModel, NextWordModel};
use crate::proactive::{make_query, ExpanderChoice, Expander, ExpansionWeighting, IntentExpander, LmExpander};
use crate::stopwords::StopWords;

pub use synth::{synth_corpus, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Exploratory,
    KnownItem,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Exploratory => "exploratory",
            Task::KnownItem => "known-item",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exploratory" => Ok(Task::Exploratory),
            "known-item" => Ok(Task::KnownItem),
            other => Err(Error::InvalidParameter(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub top_k: usize,
    pub n_exp: usize,
    pub beam: BeamParams,
    pub weighting: ExpansionWeighting,
    pub c: f64,
    pub tau: f64,
    /// Known-item only: keep the target out of every result list.
    pub exclude_target: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            n_exp: DEFAULT_N_EXP,
            beam: BeamParams::default(),
            weighting: ExpansionWeighting::Uniform,
            c: DEFAULT_C,
            tau: DEFAULT_TAU,
            exclude_target: false,
        }
    }
}

/// Shared read-only resources for a simulation run.
#[derive(Debug, Clone)]
pub struct SimEnv<'a, M> {
    pub corpus: &'a Corpus,
    pub stats: &'a CorpusStats,
    pub index: &'a InvertedIndex,
    pub model: Option<&'a M>,
    pub linrel: Option<&'a LinRel>,
    pub stopwords: &'a StopWords,
    pub config: SimConfig,
}

/// Per-document record: one metric value per window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub doc_id: String,
    pub target: Option<String>,
    pub windows: Vec<f64>,
    /// Windows whose expander failed and fell back to the baseline query.
    pub fallbacks: usize,
}

impl TrialLog {
    pub fn mean(&self) -> f64 {
        self.windows.iter().sum::<f64>() / self.windows.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub task: Task,
    pub method: ExpanderChoice,
    pub n: usize,
    pub logs: Vec<TrialLog>,
    pub skips: usize,
}

impl CellResult {
    pub fn completed(&self) -> usize {
        self.logs.len()
    }

    /// Mean over completed trials, `None` when there are none.
    pub fn mean(&self) -> Option<f64> {
        if self.logs.is_empty() {
            return None;
        }
        Some(self.logs.iter().map(TrialLog::mean).sum::<f64>() / self.logs.len() as f64)
    }

    pub fn stderr(&self) -> Option<f64> {
        let mean = self.mean()?;
        let k = self.logs.len();
        if k < 2 {
            return Some(0.0);
        }
        let var = self
            .logs
            .iter()
            .map(|l| (l.mean() - mean).powi(2))
            .sum::<f64>()
            / (k - 1) as f64;
        Some((var / k as f64).sqrt())
    }
}

/// Input documents for `trials` trials: distinct when `trials ≤ n_docs`,
/// otherwise drawn with replacement.
pub fn trial_documents(n_docs: usize, trials: usize, seed: u64) -> Vec<usize> {
    if n_docs == 0 || trials == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if trials <= n_docs {
        sample(&mut rng, n_docs, trials).into_vec()
    } else {
        (0..trials).map(|_| rng.gen_range(0..n_docs)).collect()
    }
}

/// Every length-`n` window of `tokens`, in order.
pub fn sliding_windows(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if n == 0 {
        return Vec::new();
    }
    tokens.windows(n).map(<[String]>::to_vec).collect()
}

impl<'a, M: NextWordModel> SimEnv<'a, M> {
    fn expander(&self, method: ExpanderChoice) -> Result<Expander<'a, M>> {
        Ok(match method {
            ExpanderChoice::Baseline => Expander::Baseline,
            ExpanderChoice::LmBeam => Expander::Lm(LmExpander {
                model: self
                    .model
                    .ok_or_else(|| Error::InvalidInput("the lm method needs a next-word model".into()))?,
                stats: self.stats,
                stopwords: self.stopwords,
                params: self.config.beam,
            }),
            ExpanderChoice::IntentLinrel => Expander::Intent(IntentExpander::with_params(
                self.linrel
                    .ok_or_else(|| Error::InvalidInput("the intent method needs a LinRel model".into()))?,
                self.stopwords,
                self.config.c,
                self.config.tau,
            )),
        })
    }

    /// The best match for the whole of document `doc` among the others.
    pub fn known_item_target(&self, doc: usize) -> Option<usize> {
        let tokens = self.corpus.docs()[doc].tokens();
        let q = WeightedQuery::from_words(&tokens);
        self.index.search_filtered(&q, 1, |d| d != doc).hits.first().map(|h| h.doc)
    }

    fn run_trial(&self, task: Task, method: ExpanderChoice, n: usize, doc: usize) -> Result<Option<TrialLog>> {
        let input = &self.corpus.docs()[doc];
        let tokens = input.tokens();
        if tokens.len() < n || n == 0 {
            return Ok(None);
        }
        let target = match task {
            Task::Exploratory => None,
            Task::KnownItem => match self.known_item_target(doc) {
                Some(t) => Some(t),
                None => return Ok(None),
            },
        };
        let mut expander = self.expander(method)?;
        expander.reset();
        let top_k = self.config.top_k;
        let keep = |d: usize| d != doc && !(self.config.exclude_target && Some(d) == target);
        let mut log = TrialLog {
            doc_id: input.id.clone(),
            target: target.map(|t| self.corpus.docs()[t].id.clone()),
            windows: Vec::with_capacity(tokens.len() + 1 - n),
            fallbacks: 0,
        };
        for window in sliding_windows(&tokens, n) {
            let pq = make_query(&window, &mut expander, self.config.n_exp, self.config.weighting)?;
            log.fallbacks += usize::from(pq.fallback.is_some());
            let result = self.index.search_filtered(&pq.query, top_k, keep);
            let metric = match target {
                None => {
                    let relevant = result
                        .hits
                        .iter()
                        .filter(|h| self.corpus.docs()[h.doc].shares_topic(input))
                        .count();
                    relevant as f64 / top_k as f64
                }
                Some(t) => f64::from(u8::from(result.contains_doc(t))),
            };
            log.windows.push(metric);
        }
        Ok(Some(log))
    }

    pub fn run_cell(&self, task: Task, method: ExpanderChoice, n: usize, trials: usize, seed: u64) -> Result<CellResult> {
        if n == 0 {
            return Err(Error::InvalidParameter("window size n must be at least 1".into()));
        }
        if self.config.top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if task == Task::Exploratory && !self.corpus.has_topics() {
            return Err(Error::InvalidInput("exploratory task needs topic labels on every document".into()));
        }
        // Fail early on a missing expander even when no trial would run it.
        self.expander(method)?;
        let docs = trial_documents(self.corpus.len(), trials, seed);
        let outcomes: Vec<Result<Option<TrialLog>>> = docs
            .par_iter()
            .map(|&d| self.run_trial(task, method, n, d))
            .collect();
        let mut cell = CellResult {
            task,
            method,
            n,
            logs: Vec::with_capacity(docs.len()),
            skips: 0,
        };
        for o in outcomes {
            match o? {
                Some(log) => cell.logs.push(log),
                None => cell.skips += 1,
            }
        }
        Ok(cell)
    }

    pub fn exploratory_precision(&self, method: ExpanderChoice, n: usize, trials: usize, seed: u64) -> Result<CellResult> {
        self.run_cell(Task::Exploratory, method, n, trials, seed)
    }

    pub fn known_item_found(&self, method: ExpanderChoice, n: usize, trials: usize, seed: u64) -> Result<CellResult> {
        self.run_cell(Task::KnownItem, method, n, trials, seed)
    }

    /// Known-item check with the entire input document as the only query:
    /// fraction of trials whose target lands in the top `k`.
    pub fn known_item_full_document(&self, trials: usize, seed: u64) -> CellResult {
        let docs = trial_documents(self.corpus.len(), trials, seed);
        let mut cell = CellResult {
            task: Task::KnownItem,
            method: ExpanderChoice::Baseline,
            n: 0,
            logs: Vec::new(),
            skips: 0,
        };
        for doc in docs {
            let Some(target) = self.known_item_target(doc) else {
                cell.skips += 1;
                continue;
            };
            let tokens = self.corpus.docs()[doc].tokens();
            let q = WeightedQuery::from_words(&tokens);
            let r = self.index.search_filtered(&q, self.config.top_k, |d| d != doc);
            cell.logs.push(TrialLog {
                doc_id: self.corpus.docs()[doc].id.clone(),
                target: Some(self.corpus.docs()[target].id.clone()),
                windows: vec![f64::from(u8::from(r.contains_doc(target)))],
                fallbacks: 0,
            });
        }
        cell
    }

    /// Sweeps every (task, method, n) cell. A failing cell is recorded and
    /// the sweep continues.
    pub fn run_suite(&self, cfg: &SuiteConfig) -> SuiteReport {
        let mut report = SuiteReport::default();
        for &task in &cfg.tasks {
            for &method in &cfg.methods {
                for &n in &cfg.n_grid {
                    match self.run_cell(task, method, n, cfg.trials, cfg.seed) {
                        Ok(cell) => {
                            report.rows.push(ReportRow::from_cell(&cell, cfg.trials));
                            report.cells.push(cell);
                        }
                        Err(e) => {
                            report.rows.push(ReportRow {
                                task,
                                method,
                                n,
                                trials: 0,
                                mean: None,
                                stderr: None,
                                skips: 0,
                            });
                            report.errors.push(format!("{task},{method},{n}: {e}"));
                        }
                    }
                }
            }
        }
        report
    }
}

/// Owned counterpart of [`SimEnv`], built straight from a corpus.
#[derive(Debug)]
pub struct SimResources {
    pub corpus: Corpus,
    pub stats: CorpusStats,
    pub index: InvertedIndex,
    pub model: Option<LanguageModel>,
    pub linrel: Option<LinRel>,
}

impl SimResources {
    /// Index only; no expander resources.
    pub fn baseline(corpus: Corpus) -> Result<Self> {
        let stats = CorpusStats::compute(corpus.docs());
        let index = InvertedIndex::build(corpus.docs(), &stats)?;
        Ok(Self {
            corpus,
            stats,
            index,
            model: None,
            linrel: None,
        })
    }

    /// Index, a default n-gram model over the whole corpus and a LinRel
    /// model over a seeded column sample of at most 2000 documents.
    pub fn full(corpus: Corpus, seed: u64) -> Result<Self> {
        let mut res = Self::baseline(corpus)?;
        let vocab = Vocabulary::build(res.corpus.docs(), usize::MAX)?;
        res.model = Some(LanguageModel::NGram(NGramModel::train(
            res.corpus.docs(),
            &vocab,
            DEFAULT_ORDER,
            DEFAULT_ALPHA,
        )?));
        let cols = sample_columns(res.corpus.len(), DEFAULT_SAMPLE, seed);
        let matrix = TermDocMatrix::build(res.corpus.docs(), &cols, &res.stats, StopWords::english())?;
        res.linrel = Some(LinRel::new(matrix, DEFAULT_MU)?);
        Ok(res)
    }

    pub fn env<'a>(&'a self, stopwords: &'a StopWords, config: SimConfig) -> SimEnv<'a, LanguageModel> {
        SimEnv {
            corpus: &self.corpus,
            stats: &self.stats,
            index: &self.index,
            model: self.model.as_ref(),
            linrel: self.linrel.as_ref(),
            stopwords,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub tasks: Vec<Task>,
    pub methods: Vec<ExpanderChoice>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub sim: SimConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            tasks: vec![Task::Exploratory, Task::KnownItem],
            methods: ExpanderChoice::ALL.to_vec(),
            n_grid: vec![3, 5, 10, 20, 40],
            trials: 50,
            seed: 0,
            sim: SimConfig::default(),
        }
    }
}

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: Task,
    pub method: ExpanderChoice,
    pub n: usize,
    /// Completed trials.
    pub trials: usize,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub skips: usize,
}

impl ReportRow {
    fn from_cell(cell: &CellResult, _requested: usize) -> Self {
        Self {
            task: cell.task,
            method: cell.method,
            n: cell.n,
            trials: cell.completed(),
            mean: cell.mean(),
            stderr: cell.stderr(),
            skips: cell.skips,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<ReportRow>,
    pub cells: Vec<CellResult>,
    pub errors: Vec<String>,
}

pub const REPORT_HEADER: &str = "task,method,n,trials,mean,stderr,skips";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.task,
            r.method,
            r.n,
            r.trials,
            fmt_opt(r.mean),
            fmt_opt(r.stderr),
            r.skips
        ));
    }
    out
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let bad = |line: &str| Error::InvalidInput(format!("malformed report line {line:?}"));
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(Error::InvalidInput("report does not start with the expected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(line));
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(line))
                }
            };
            Ok(ReportRow {
                task: f[0].parse()?,
                method: f[1].parse()?,
                n: f[2].parse().map_err(|_| bad(line))?,
                trials: f[3].parse().map_err(|_| bad(line))?,
                mean: opt(f[4])?,
                stderr: opt(f[5])?,
                skips: f[6].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

/// Per-window metric log: `task,method,n,doc_id,window,metric`.
pub fn windows_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("task,method,n,doc_id,window,metric\n");
    for c in cells {
        for log in &c.logs {
            for (i, m) in log.windows.iter().enumerate() {
                out.push_str(&format!("{},{},{},{},{},{}\n", c.task, c.method, c.n, log.doc_id, i, m));
            }
        }
    }
    out
}

/// Writes `report.csv`, `windows.csv`, `config.json`, `errors.txt` (when a
/// cell failed) and `curve_<task>.png` / `.svg` for every task.
pub fn write_suite(report: &SuiteReport, cfg: &SuiteConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = out.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    let csv = report_csv(&report.rows);
    write("report.csv", csv.as_bytes())?;
    // Plot what was written, so re-plotting a saved report is exact.
    let rows = parse_report_csv(&csv)?;
    write("windows.csv", windows_csv(&report.cells).as_bytes())?;
    write("config.json", serde_json::to_string_pretty(cfg)?.as_bytes())?;
    if !report.errors.is_empty() {
        write("errors.txt", (report.errors.join("\n") + "\n").as_bytes())?;
    }
    let by_task: BTreeMap<Task, Vec<ReportRow>> = rows.iter().fold(BTreeMap::new(), |mut m, r| {
        m.entry(r.task).or_insert_with(Vec::new).push(r.clone());
        m
    });
    for (task, rows) in by_task {
        write(&format!("curve_{task}.png"), &plot::render_png(&rows)?)?;
        write(&format!("curve_{task}.svg"), plot::render_svg(task, &rows).as_bytes())?;
    }
    Ok(())
}
