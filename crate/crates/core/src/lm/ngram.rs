//! Add-α backoff n-gram model.
//!
//! For a history `h` the model uses the longest suffix of `h` (at most
//! `order - 1` words) that was observed as a context during training and
//! returns `(c(h, w) + α) / (c(h) + α·V)`. The unigram level is always
//! observed, so the chain terminates there and every distribution sums to 1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{LmSession, NextWordModel};
use crate::corpus::{sentences, Document, Vocabulary, WordId};
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ContextCounts {
    total: u64,
    next: HashMap<WordId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    vocab: Vocabulary,
    order: usize,
    alpha: f64,
    /// `tables[k]` maps a k-word context to its continuation counts.
    tables: Vec<HashMap<Vec<WordId>, ContextCounts>>,
}

impl NGramModel {
    /// Trains on every sentence of `docs`; each sentence is padded on the
    /// left with `<eos>` and terminated by `<eos>`.
    pub fn train(docs: &[Document], vocab: &Vocabulary, order: usize, alpha: f64) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidInput("cannot train an n-gram model on an empty corpus".into()));
        }
        let sents: Vec<Vec<WordId>> = docs
            .iter()
            .flat_map(|d| sentences(&d.text))
            .map(|s| vocab.encode(&s))
            .collect();
        Self::train_on_sentences(&sents, vocab, order, alpha)
    }

    pub fn train_on_sentences(
        sents: &[Vec<WordId>],
        vocab: &Vocabulary,
        order: usize,
        alpha: f64,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("n-gram order must be at least 1".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothing constant must be finite and >= 0, got {alpha}")));
        }
        if sents.iter().all(Vec::is_empty) {
            return Err(Error::InvalidInput("cannot train an n-gram model on an empty corpus".into()));
        }
        let mut tables = vec![HashMap::new(); order];
        for s in sents.iter().filter(|s| !s.is_empty()) {
            let mut padded = vec![WordId::EOS; order - 1];
            padded.extend_from_slice(s);
            padded.push(WordId::EOS);
            for pos in (order - 1)..padded.len() {
                let target = padded[pos];
                for (k, table) in tables.iter_mut().enumerate() {
                    let ctx = padded[pos - k..pos].to_vec();
                    let entry: &mut ContextCounts = table.entry(ctx).or_default();
                    entry.total += 1;
                    *entry.next.entry(target).or_default() += 1;
                }
            }
        }
        Ok(Self {
            vocab: vocab.clone(),
            order,
            alpha,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Distribution after `history`, whose last `order - 1` words are used.
    pub fn distribution(&self, history: &[WordId]) -> Vec<f64> {
        let v = self.vocab.len();
        let max_k = (self.order - 1).min(history.len());
        let counts = (0..=max_k)
            .rev()
            .find_map(|k| {
                self.tables[k]
                    .get(&history[history.len() - k..])
                    .filter(|c| c.total > 0)
            })
            .expect("unigram table is never empty after training");
        let denom = counts.total as f64 + self.alpha * v as f64;
        let mut dist = vec![self.alpha / denom; v];
        for (&w, &c) in &counts.next {
            dist[w.index()] = (c as f64 + self.alpha) / denom;
        }
        dist
    }

    /// Per-token perplexity over `docs`, padding and terminating each
    /// sentence exactly as in training.
    pub fn perplexity(&self, docs: &[Document]) -> Result<f64> {
        let mut nll = 0.0;
        let mut count = 0usize;
        for sent in docs.iter().flat_map(|d| sentences(&d.text)) {
            let mut padded = vec![WordId::EOS; self.order - 1];
            padded.extend(self.vocab.encode(&sent));
            padded.push(WordId::EOS);
            for pos in (self.order - 1)..padded.len() {
                let p = self.distribution(&padded[..pos])[padded[pos].index()];
                nll -= p.ln();
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::InvalidInput("no tokens to evaluate".into()));
        }
        Ok((nll / count as f64).exp())
    }

    pub(crate) fn to_parts(&self) -> NGramParts {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let mut rows: Vec<NGramRow> = t
                    .iter()
                    .map(|(ctx, c)| {
                        let mut next: Vec<(WordId, u64)> = c.next.iter().map(|(&w, &n)| (w, n)).collect();
                        next.sort();
                        NGramRow {
                            context: ctx.clone(),
                            next,
                        }
                    })
                    .collect();
                rows.sort_by(|a, b| a.context.cmp(&b.context));
                rows
            })
            .collect();
        NGramParts {
            order: self.order,
            alpha: self.alpha,
            tables,
        }
    }

    pub(crate) fn from_parts(vocab: Vocabulary, parts: NGramParts) -> Result<Self> {
        if parts.order == 0 || parts.tables.len() != parts.order {
            return Err(Error::InvalidInput("n-gram tables do not match the order".into()));
        }
        let v = vocab.len();
        let tables = parts
            .tables
            .into_iter()
            .map(|rows| {
                rows.into_iter()
                    .map(|r| {
                        if r.context.iter().chain(r.next.iter().map(|(w, _)| w)).any(|w| w.index() >= v) {
                            return Err(Error::InvalidInput("n-gram entry outside vocabulary".into()));
                        }
                        let total = r.next.iter().map(|(_, n)| n).sum();
                        Ok((
                            r.context,
                            ContextCounts {
                                total,
                                next: r.next.into_iter().collect(),
                            },
                        ))
                    })
                    .collect::<Result<HashMap<_, _>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if tables[0].get(&Vec::new()).is_none_or(|c| c.total == 0) {
            return Err(Error::InvalidInput("n-gram model has no unigram counts".into()));
        }
        Ok(Self {
            vocab,
            order: parts.order,
            alpha: parts.alpha,
            tables,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct NGramRow {
    context: Vec<WordId>,
    next: Vec<(WordId, u64)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct NGramParts {
    order: usize,
    alpha: f64,
    tables: Vec<Vec<NGramRow>>,
}

impl NextWordModel for NGramModel {
    type Session<'a> = NGramSession<'a>;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn session(&self) -> NGramSession<'_> {
        let mut s = NGramSession {
            model: self,
            history: Vec::with_capacity(self.order),
        };
        s.reset();
        s
    }
}

#[derive(Debug, Clone)]
pub struct NGramSession<'a> {
    model: &'a NGramModel,
    /// Most recent `order - 1` words, left-padded with `<eos>`.
    history: Vec<WordId>,
}

impl LmSession for NGramSession<'_> {
    fn reset(&mut self) {
        self.history.clear();
        self.history.resize(self.model.order - 1, WordId::EOS);
    }

    fn feed(&mut self, word: WordId) -> Result<()> {
        let word = if word.index() < self.model.vocab.len() { word } else { WordId::UNK };
        if self.model.order > 1 {
            self.history.remove(0);
            self.history.push(word);
        }
        Ok(())
    }

    fn next_distribution(&self) -> Result<Vec<f64>> {
        Ok(self.model.distribution(&self.history))
    }
}
