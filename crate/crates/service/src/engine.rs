//! Session logic independent of HTTP: the shared read-only engine, per-session
//! state and the idle-expiring session store.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use proactive_core::beam::{BeamParams, DEFAULT_N_EXP};
use proactive_core::corpus::{tokenize, Corpus, CorpusStats, Document, WordId};
use proactive_core::index::{InvertedIndex, DEFAULT_TOP_K};
use proactive_core::intent::{LinRel, RelevanceState, DEFAULT_C, DEFAULT_TAU};
use proactive_core::lm::{top_candidates, LanguageModel, LmSession, NextWordModel};
use proactive_core::proactive::{
    make_query, ContextWindow, Expander, ExpanderChoice, ExpansionWeighting, IntentExpander, LmExpander,
};
use proactive_core::stopwords::StopWords;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::ServiceError;

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

/// Per-session knobs; every field may be omitted from a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    /// Window length in words.
    pub n: usize,
    pub n_exp: usize,
    pub b: usize,
    pub k: usize,
    pub d: usize,
    pub c: f64,
    pub tau: f64,
    pub weighting: ExpansionWeighting,
}

impl Default for SessionParams {
    fn default() -> Self {
        let beam = BeamParams::default();
        Self {
            n: DEFAULT_WINDOW,
            n_exp: DEFAULT_N_EXP,
            b: beam.b,
            k: beam.k,
            d: beam.d,
            c: DEFAULT_C,
            tau: DEFAULT_TAU,
            weighting: ExpansionWeighting::Uniform,
        }
    }
}

impl SessionParams {
    fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: &str| Err(ServiceError::BadRequest(m.to_owned()));
        if self.n == 0 {
            return bad("window length n must be at least 1");
        }
        if self.b == 0 || self.k == 0 {
            return bad("beam parameters b and k must be at least 1");
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad("c must be finite and nonnegative");
        }
        if !(self.tau >= 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in [0, 1]");
        }
        Ok(())
    }

    fn beam(&self) -> BeamParams {
        BeamParams {
            b: self.b,
            k: self.k,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub doc_id: String,
    pub title: String,
    pub score: f64,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextResponse {
    pub recommendations: Vec<Recommendation>,
    /// Predicted continuation words per tree level, best first.
    pub predictions: Vec<Vec<String>>,
    /// Expansion words added to the last query.
    pub expansion: Vec<String>,
    /// True when the expander failed and the plain window was queried.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub choice: ExpanderChoice,
    pub params: SessionParams,
    window: ContextWindow,
    relevance: Option<RelevanceState>,
    last: Vec<Recommendation>,
    last_expansion: Vec<String>,
    last_fallback: bool,
}

impl Session {
    pub fn window(&self) -> Vec<String> {
        self.window.words()
    }
}

/// Shared, immutable retrieval resources.
#[derive(Debug)]
pub struct Engine {
    pub corpus: Corpus,
    pub stats: CorpusStats,
    pub index: InvertedIndex,
    pub model: Option<LanguageModel>,
    pub linrel: Option<LinRel>,
    pub stopwords: StopWords,
    pub top_k: usize,
}

impl Engine {
    pub fn new(corpus: Corpus, stats: CorpusStats, index: InvertedIndex) -> Self {
        Self {
            corpus,
            stats,
            index,
            model: None,
            linrel: None,
            stopwords: StopWords::english().clone(),
            top_k: DEFAULT_TOP_K,
        }
    }

    pub fn with_model(mut self, model: LanguageModel) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_linrel(mut self, linrel: LinRel) -> Self {
        self.linrel = Some(linrel);
        self
    }

    pub fn new_session(&self, choice: ExpanderChoice, params: SessionParams) -> Result<Session, ServiceError> {
        params.validate()?;
        let relevance = match choice {
            ExpanderChoice::Baseline => None,
            ExpanderChoice::LmBeam => {
                if self.model.is_none() {
                    return Err(ServiceError::Unavailable(
                        "the lm-beam expander needs a language model, but the server was started without one".into(),
                    ));
                }
                None
            }
            ExpanderChoice::IntentLinrel => {
                let lr = self.linrel.as_ref().ok_or_else(|| {
                    ServiceError::Unavailable("the intent-linrel expander is not available on this server".into())
                })?;
                Some(RelevanceState::new(lr.matrix().num_words(), params.tau))
            }
        };
        Ok(Session {
            choice,
            window: ContextWindow::new(params.n),
            params,
            relevance,
            last: Vec::new(),
            last_expansion: Vec::new(),
            last_fallback: false,
        })
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.corpus.get(id)
    }

    /// One keypress. A completed word enters the window and triggers a
    /// query; a partial word only refreshes the continuation predictions,
    /// filtered to words starting with it.
    pub fn update(&self, session: &mut Session, word: &str, completed: bool) -> Result<ContextResponse, ServiceError> {
        if !completed {
            let prefix = word.trim().to_lowercase();
            let predictions = self.prefix_predictions(session, &prefix)?;
            return Ok(ContextResponse {
                recommendations: session.last.clone(),
                predictions,
                expansion: session.last_expansion.clone(),
                fallback: session.last_fallback,
            });
        }
        for token in tokenize(word) {
            session.window.push(token);
        }
        if session.window.is_empty() {
            return Ok(ContextResponse {
                recommendations: Vec::new(),
                predictions: Vec::new(),
                expansion: Vec::new(),
                fallback: false,
            });
        }
        let window = session.window.words();
        let p = session.params.clone();
        let (query, predictions) = match session.choice {
            ExpanderChoice::Baseline => {
                let mut e: Expander<'_, LanguageModel> = Expander::Baseline;
                (make_query(&window, &mut e, p.n_exp, p.weighting)?, Vec::new())
            }
            ExpanderChoice::LmBeam => {
                let lm = LmExpander {
                    model: self.model.as_ref().ok_or_else(|| ServiceError::Unavailable("no language model".into()))?,
                    stats: &self.stats,
                    stopwords: &self.stopwords,
                    params: p.beam(),
                };
                let predictions = self.tree_predictions(&lm, &window);
                let mut e = Expander::Lm(lm);
                (make_query(&window, &mut e, p.n_exp, p.weighting)?, predictions)
            }
            ExpanderChoice::IntentLinrel => {
                let lr = self.linrel.as_ref().ok_or_else(|| ServiceError::Unavailable("no LinRel model".into()))?;
                let state = session
                    .relevance
                    .take()
                    .unwrap_or_else(|| RelevanceState::new(lr.matrix().num_words(), p.tau));
                let mut e: Expander<'_, LanguageModel> =
                    Expander::Intent(IntentExpander::with_state(lr, &self.stopwords, p.c, state)?);
                let q = make_query(&window, &mut e, p.n_exp, p.weighting);
                if let Expander::Intent(ie) = e {
                    session.relevance = Some(ie.into_state());
                }
                (q?, Vec::new())
            }
        };
        let hits = self.index.search(&query.query, self.top_k).hits;
        session.last = hits
            .into_iter()
            .map(|h| {
                let title = self.corpus.docs()[h.doc].title.clone();
                Recommendation {
                    link: format!("/documents/{}", h.doc_id),
                    doc_id: h.doc_id,
                    title,
                    score: h.score,
                }
            })
            .collect();
        if let Some(reason) = &query.fallback {
            tracing::warn!(expander = %session.choice, %reason, "expansion failed; answered with the baseline query");
        }
        session.last_expansion = query.expansion;
        session.last_fallback = query.fallback.is_some();
        Ok(ContextResponse {
            recommendations: session.last.clone(),
            predictions,
            expansion: session.last_expansion.clone(),
            fallback: session.last_fallback,
        })
    }

    /// Distinct displayable words per level of the beam tree. A failing
    /// model yields no predictions; the query itself reports the fallback.
    fn tree_predictions(&self, lm: &LmExpander<'_, LanguageModel>, window: &[String]) -> Vec<Vec<String>> {
        let Ok(tree) = lm.tree(window) else {
            return Vec::new();
        };
        let vocab = lm.model.vocab();
        tree.levels
            .iter()
            .map(|level| {
                let mut words: Vec<String> = Vec::new();
                for node in level {
                    if node.word == WordId::EOS || node.word == WordId::UNK {
                        continue;
                    }
                    let w = vocab.word(node.word);
                    if !words.iter().any(|x| x == w) {
                        words.push(w.to_owned());
                    }
                }
                words
            })
            .collect()
    }

    fn prefix_predictions(&self, session: &Session, prefix: &str) -> Result<Vec<Vec<String>>, ServiceError> {
        let Some(model) = self.model.as_ref().filter(|_| session.choice == ExpanderChoice::LmBeam) else {
            return Ok(Vec::new());
        };
        let vocab = model.vocab();
        let mut s = model.session();
        s.feed_all(&vocab.encode(&session.window.words()))?;
        let dist = s.next_distribution()?;
        let words: Vec<String> = top_candidates(&dist, vocab, session.params.b, |w| {
            w == WordId::UNK || w == WordId::EOS || !vocab.word(w).starts_with(prefix)
        })
        .into_iter()
        .filter(|c| c.prob > 0.0)
        .map(|c| vocab.word(c.word).to_owned())
        .collect();
        Ok(if words.is_empty() { Vec::new() } else { vec![words] })
    }
}

struct Entry {
    session: Arc<tokio::sync::Mutex<Session>>,
    last_used: Instant,
}

/// Sessions keyed by id. Each session has its own lock, so updates to one
/// session are serialized while different sessions proceed in parallel.
pub struct SessionStore {
    entries: Mutex<HashMap<Uuid, Entry>>,
    idle_timeout: Duration,
}

impl SessionStore {
    pub fn new(idle_timeout: Duration) -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            idle_timeout,
        }
    }

    pub fn idle_timeout(&self) -> Duration {
        self.idle_timeout
    }

    pub fn insert(&self, session: Session) -> Uuid {
        let id = Uuid::new_v4();
        let entry = Entry {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            last_used: Instant::now(),
        };
        self.entries.lock().expect("session map poisoned").insert(id, entry);
        id
    }

    /// The session, unless unknown or idle for longer than the timeout.
    /// Marks it as used.
    pub fn get(&self, id: &Uuid) -> Option<Arc<tokio::sync::Mutex<Session>>> {
        let now = Instant::now();
        let mut map = self.entries.lock().expect("session map poisoned");
        let entry = map.get_mut(id)?;
        if now.duration_since(entry.last_used) > self.idle_timeout {
            map.remove(id);
            return None;
        }
        entry.last_used = now;
        Some(entry.session.clone())
    }

    pub fn remove(&self, id: &Uuid) -> bool {
        self.entries.lock().expect("session map poisoned").remove(id).is_some()
    }

    /// Drops every session idle for longer than the timeout; returns how many.
    pub fn sweep(&self) -> usize {
        let now = Instant::now();
        let mut map = self.entries.lock().expect("session map poisoned");
        let before = map.len();
        map.retain(|_, e| now.duration_since(e.last_used) <= self.idle_timeout);
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
