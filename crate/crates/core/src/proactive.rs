//! Proactive query construction: the `n` most recent words plus `n_exp`
//! expansion words from the selected expander, issued without any explicit
//! query from the user.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beam::{beam_expand, score_candidates, select_expansion, BeamParams, BeamTree};
use crate::corpus::CorpusStats;
use crate::error::{Error, Result};
use crate::index::{InvertedIndex, SearchResult, WeightedQuery};
use crate::intent::{linrel_expand, LinRel, RelevanceState, DEFAULT_C, DEFAULT_TAU};
use crate::lm::NextWordModel;
use crate::stopwords::StopWords;

/// The `n` most recent input words, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    n: usize,
    words: VecDeque<String>,
}

impl ContextWindow {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            words: VecDeque::with_capacity(n),
        }
    }

    /// Appends a completed word, dropping the oldest when full.
    pub fn push(&mut self, word: impl Into<String>) {
        if self.n == 0 {
            return;
        }
        if self.words.len() == self.n {
            self.words.pop_front();
        }
        self.words.push_back(word.into());
    }

    pub fn words(&self) -> Vec<String> {
        self.words.iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.words.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpanderChoice {
    Baseline,
    LmBeam,
    IntentLinrel,
}

impl ExpanderChoice {
    pub const ALL: [ExpanderChoice; 3] = [Self::Baseline, Self::LmBeam, Self::IntentLinrel];

    /// Short label used in reports and on the command line.
    pub fn label(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::LmBeam => "lm",
            Self::IntentLinrel => "intent",
        }
    }
}

impl fmt::Display for ExpanderChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExpanderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "lm" | "lm-beam" => Ok(Self::LmBeam),
            "intent" | "intent-linrel" => Ok(Self::IntentLinrel),
            other => Err(Error::InvalidParameter(format!("unknown expander {other:?}"))),
        }
    }
}

/// How expansion words are weighted in the query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionWeighting {
    /// Every expansion word gets weight 1.
    #[default]
    Uniform,
    /// Weight proportional to the expander's score, the best word getting 1.
    Score,
}

/// Beam-search expansion over a next-word model.
#[derive(Debug, Clone)]
pub struct LmExpander<'a, M> {
    pub model: &'a M,
    pub stats: &'a CorpusStats,
    pub stopwords: &'a StopWords,
    pub params: BeamParams,
}

impl<M: NextWordModel> LmExpander<'_, M> {
    pub fn tree(&self, window: &[String]) -> Result<BeamTree> {
        let ids = self.model.vocab().encode(window);
        beam_expand(self.model, &ids, self.params)
    }

    /// (word, idf·p) for the `n_exp` best words.
    pub fn expand(&self, window: &[String], n_exp: usize) -> Result<Vec<(String, f64)>> {
        if n_exp == 0 {
            return Ok(Vec::new());
        }
        let tree = self.tree(window)?;
        let terms = score_candidates(&tree, self.model.vocab(), self.stats, self.stopwords, window);
        let chosen = select_expansion(&terms, n_exp);
        Ok(chosen
            .into_iter()
            .map(|w| {
                let s = terms.iter().find(|t| t.word == w).map_or(0.0, |t| t.score);
                (w, s)
            })
            .collect())
    }
}

/// LinRel expansion with its own relevance state. Each call to
/// [`expand`](Self::expand) is one window and ticks the decay once.
#[derive(Debug, Clone)]
pub struct IntentExpander<'a> {
    pub linrel: &'a LinRel,
    pub stopwords: &'a StopWords,
    pub c: f64,
    state: RelevanceState,
}

impl<'a> IntentExpander<'a> {
    pub fn new(linrel: &'a LinRel, stopwords: &'a StopWords) -> Self {
        Self::with_params(linrel, stopwords, DEFAULT_C, DEFAULT_TAU)
    }

    pub fn with_params(linrel: &'a LinRel, stopwords: &'a StopWords, c: f64, tau: f64) -> Self {
        Self {
            linrel,
            stopwords,
            c,
            state: RelevanceState::new(linrel.matrix().num_words(), tau),
        }
    }

    /// Resumes from a state saved with [`into_state`](Self::into_state).
    pub fn with_state(linrel: &'a LinRel, stopwords: &'a StopWords, c: f64, state: RelevanceState) -> Result<Self> {
        if state.y().len() != linrel.matrix().num_words() {
            return Err(Error::InvalidInput("relevance state does not match the LinRel matrix".into()));
        }
        Ok(Self {
            linrel,
            stopwords,
            c,
            state,
        })
    }

    pub fn into_state(self) -> RelevanceState {
        self.state
    }

    pub fn state(&self) -> &RelevanceState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }

    /// (word, v) for the `n_exp` best words.
    pub fn expand(&mut self, window: &[String], n_exp: usize) -> Result<Vec<(String, f64)>> {
        self.state.update(self.linrel.matrix(), window);
        if n_exp == 0 {
            return Ok(Vec::new());
        }
        let sol = self.linrel.solve(self.state.y())?;
        Ok(linrel_expand(self.linrel.matrix(), &sol, window, n_exp, self.c, self.stopwords)
            .into_iter()
            .map(|t| (t.word, t.v))
            .collect())
    }
}

/// Exactly one expander is active per query.
#[derive(Debug, Clone)]
pub enum Expander<'a, M> {
    Baseline,
    Lm(LmExpander<'a, M>),
    Intent(IntentExpander<'a>),
}

impl<M: NextWordModel> Expander<'_, M> {
    pub fn choice(&self) -> ExpanderChoice {
        match self {
            Expander::Baseline => ExpanderChoice::Baseline,
            Expander::Lm(_) => ExpanderChoice::LmBeam,
            Expander::Intent(_) => ExpanderChoice::IntentLinrel,
        }
    }

    pub fn expand(&mut self, window: &[String], n_exp: usize) -> Result<Vec<(String, f64)>> {
        match self {
            Expander::Baseline => Ok(Vec::new()),
            Expander::Lm(e) => e.expand(window, n_exp),
            Expander::Intent(e) => e.expand(window, n_exp),
        }
    }

    /// Clears per-document state (the intent model's relevance vector).
    pub fn reset(&mut self) {
        if let Expander::Intent(e) = self {
            e.reset();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProactiveQuery {
    pub query: WeightedQuery,
    pub expansion: Vec<String>,
    /// Set when the expander failed and the baseline query was used instead.
    pub fallback: Option<String>,
}

/// Window words weighted by their in-window count, plus expansion words.
pub fn make_query<M: NextWordModel>(
    window: &[String],
    expander: &mut Expander<'_, M>,
    n_exp: usize,
    weighting: ExpansionWeighting,
) -> Result<ProactiveQuery> {
    if window.is_empty() {
        return Err(Error::InvalidInput("proactive query needs a nonempty window".into()));
    }
    let mut query = WeightedQuery::from_words(window);
    let (expansion, fallback) = match expander.expand(window, n_exp) {
        Ok(e) => (e, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let max = expansion.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    for (word, score) in &expansion {
        let w = match weighting {
            ExpansionWeighting::Uniform => 1.0,
            ExpansionWeighting::Score if max > 0.0 => score / max,
            ExpansionWeighting::Score => 1.0,
        };
        query.add(word, w);
    }
    Ok(ProactiveQuery {
        query,
        expansion: expansion.into_iter().map(|(w, _)| w).collect(),
        fallback,
    })
}

pub fn recommend(index: &InvertedIndex, query: &WeightedQuery, top_k: usize) -> SearchResult {
    index.search(query, top_k)
}
