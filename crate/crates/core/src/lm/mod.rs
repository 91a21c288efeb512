//! Next-word prediction models.
//!
//! A [`NextWordModel`] is immutable once trained. Prediction state lives in a
//! [`LmSession`] owned by a single caller; many sessions may share one model.
//! Distributions are conditioned on everything fed since the last reset, not
//! just the latest word.

mod file;
pub mod lstm;
pub mod ngram;

use std::cmp::Ordering;

use crate::corpus::{Vocabulary, WordId};
use crate::error::Result;

pub use file::{LanguageModel, LanguageModelSession};
pub use lstm::{LstmConfig, LstmModel, LstmSession, TrainReport};
pub use ngram::{NGramModel, NGramSession};

pub trait NextWordModel: Send + Sync {
    type Session<'a>: LmSession + Clone
    where
        Self: 'a;

    fn vocab(&self) -> &Vocabulary;

    /// A fresh session with empty history.
    fn session(&self) -> Self::Session<'_>;
}

pub trait LmSession: Send {
    fn reset(&mut self);

    /// Appends `word` to the history.
    fn feed(&mut self, word: WordId) -> Result<()>;

    /// Probability of every vocabulary entry being the next word. Sums to 1.
    fn next_distribution(&self) -> Result<Vec<f64>>;

    fn feed_all(&mut self, words: &[WordId]) -> Result<()> {
        words.iter().try_for_each(|&w| self.feed(w))
    }
}

/// A predicted word with its raw (unrenormalized) probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub word: WordId,
    pub prob: f64,
}

/// The `b` most probable entries of `dist`, ties broken lexicographically by
/// word. `b` is clamped to the number of eligible entries; words for which
/// `exclude` returns true are never returned.
pub fn top_candidates(
    dist: &[f64],
    vocab: &Vocabulary,
    b: usize,
    exclude: impl Fn(WordId) -> bool,
) -> Vec<Candidate> {
    let mut all: Vec<Candidate> = dist
        .iter()
        .enumerate()
        .map(|(i, &prob)| Candidate {
            word: WordId(i),
            prob,
        })
        .filter(|c| !exclude(c.word))
        .collect();
    let cmp = |a: &Candidate, b: &Candidate| {
        b.prob
            .partial_cmp(&a.prob)
            .unwrap_or(Ordering::Equal)
            .then_with(|| vocab.word(a.word).cmp(vocab.word(b.word)))
    };
    let b = b.min(all.len());
    if b == 0 {
        return Vec::new();
    }
    if all.len() > b {
        all.select_nth_unstable_by(b - 1, cmp);
        all.truncate(b);
    }
    all.sort_by(cmp);
    all
}

/// The `b` most probable next words for the session's current history.
pub fn model_next_dist<S: LmSession>(
    vocab: &Vocabulary,
    session: &S,
    b: usize,
) -> Result<Vec<Candidate>> {
    let dist = session.next_distribution()?;
    Ok(top_candidates(&dist, vocab, b, |_| false))
}

pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}
