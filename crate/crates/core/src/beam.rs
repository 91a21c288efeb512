//! Beam-search expansion of the written context into a pruned tree of
//! predicted continuations, and selection of expansion words from it.
//!
//! The whole context is fed to a fresh model session, so level 1 holds the
//! top-`b` successors of all `n` input words. Every surviving node at level
//! `j` contributes its own top-`b` successors to level `j + 1`; each level is
//! then pruned to the `k` nodes with the highest path score `R`, the product
//! of model probabilities from level 1 down to the node (the root, i.e. the
//! last input word, contributes no factor).
//!
//! ```text
//!              w0 = "neural"
//!         ┌──────┬─────┴─┬────────┐           level 1: ≤ b
//!      network  nets  systems  system
//!       │ │ │ │                   │ │ │ │     level 2: ≤ k·b before pruning
//!       ...                      and that of is
//! ```

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::lm::{top_candidates, LmSession, NextWordModel};
use crate::stopwords::StopWords;

pub const DEFAULT_BRANCHING: usize = 10;
pub const DEFAULT_BEAM_WIDTH: usize = 80;
pub const DEFAULT_DEPTH: usize = 3;
pub const DEFAULT_N_EXP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamParams {
    /// Branching coefficient: successors generated per surviving node.
    pub b: usize,
    /// Beam width: nodes kept per level.
    pub k: usize,
    /// Depth: number of predicted words per path.
    pub d: usize,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            b: DEFAULT_BRANCHING,
            k: DEFAULT_BEAM_WIDTH,
            d: DEFAULT_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamNode {
    pub word: WordId,
    /// 1-based tree level.
    pub level: usize,
    /// Conditional probability given the context and the path above.
    pub prob: f64,
    /// Path score R: product of `prob` over the path from level 1.
    pub score: f64,
    /// Index of the parent within the previous level; `None` at level 1.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamTree {
    pub root: WordId,
    pub params: BeamParams,
    /// Surviving nodes per level, best first.
    pub levels: Vec<Vec<BeamNode>>,
    /// Number of candidates on each level before pruning.
    pub candidates: Vec<usize>,
}

impl BeamTree {
    /// Words from level 1 down to `levels[level - 1][index]`.
    pub fn path(&self, level: usize, index: usize) -> Vec<WordId> {
        let mut out = Vec::with_capacity(level);
        let mut cur = Some(index);
        for l in (0..level).rev() {
            let node = &self.levels[l][cur.expect("parent links reach level 1")];
            out.push(node.word);
            cur = node.parent;
        }
        out.reverse();
        out
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, &BeamNode)> {
        self.levels
            .iter()
            .flat_map(|lvl| lvl.iter().enumerate())
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(Vec::is_empty)
    }
}

fn prune_order(vocab: &Vocabulary) -> impl Fn(&BeamNode, &BeamNode) -> Ordering + '_ {
    move |a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.prob.partial_cmp(&a.prob).unwrap_or(Ordering::Equal))
            .then_with(|| vocab.word(a.word).cmp(vocab.word(b.word)))
            .then_with(|| a.parent.cmp(&b.parent))
    }
}

/// Builds the pruned prediction tree for `context`. `<unk>` and
/// zero-probability words are never generated as candidates.
pub fn beam_expand<M: NextWordModel>(model: &M, context: &[WordId], params: BeamParams) -> Result<BeamTree> {
    let root = *context
        .last()
        .ok_or_else(|| Error::InvalidInput("beam expansion needs a nonempty context".into()))?;
    if params.b == 0 || params.k == 0 {
        return Err(Error::InvalidParameter(format!(
            "branching and beam width must be at least 1 (b={}, k={})",
            params.b, params.k
        )));
    }
    let vocab = model.vocab();
    let mut tree = BeamTree {
        root,
        params,
        levels: Vec::with_capacity(params.d),
        candidates: Vec::with_capacity(params.d),
    };
    if params.d == 0 {
        return Ok(tree);
    }

    let mut session = model.session();
    session.reset();
    session.feed_all(context)?;
    let mut frontier = vec![session];
    let order = prune_order(vocab);

    for level in 1..=params.d {
        let mut cands = Vec::new();
        for (parent_ix, sess) in frontier.iter().enumerate() {
            let dist = sess.next_distribution()?;
            let (parent, parent_score) = if level == 1 {
                (None, 1.0)
            } else {
                (Some(parent_ix), tree.levels[level - 2][parent_ix].score)
            };
            for c in top_candidates(&dist, vocab, params.b, |w| w == WordId::UNK) {
                if c.prob <= 0.0 {
                    continue;
                }
                cands.push(BeamNode {
                    word: c.word,
                    level,
                    prob: c.prob,
                    score: parent_score * c.prob,
                    parent,
                });
            }
        }
        tree.candidates.push(cands.len());
        cands.sort_by(&order);
        cands.truncate(params.k);

        if level < params.d {
            frontier = cands
                .iter()
                .map(|n| {
                    let parent = n.parent.unwrap_or(0);
                    let mut s = frontier[parent].clone();
                    s.feed(n.word).map(|_| s)
                })
                .collect::<Result<Vec<_>>>()?;
        }
        tree.levels.push(cands);
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm {
    pub word: String,
    /// idf(word) · p(word)
    pub score: f64,
    pub prob: f64,
    pub idf: f64,
    pub path_score: f64,
    pub level: usize,
    pub path: Vec<String>,
}

/// One term per distinct eligible word in the tree, scored by idf · p and
/// keeping the best-scoring occurrence of words that appear more than once.
/// Stop words, reserved tokens, words outside `stats` and words already in
/// `context` are dropped. Sorted by score, then word.
pub fn score_candidates<S: AsRef<str>>(
    tree: &BeamTree,
    vocab: &Vocabulary,
    stats: &CorpusStats,
    stopwords: &StopWords,
    context: &[S],
) -> Vec<ExpansionTerm> {
    let mut best: HashMap<&str, ExpansionTerm> = HashMap::new();
    for (ix, node) in tree.nodes() {
        if node.word == WordId::UNK || node.word == WordId::EOS {
            continue;
        }
        let word = vocab.word(node.word);
        if stopwords.contains(word) || context.iter().any(|c| c.as_ref() == word) {
            continue;
        }
        let Some(idf) = stats.idf(word) else {
            continue;
        };
        let score = idf * node.prob;
        if best.get(word).is_some_and(|t| t.score >= score) {
            continue;
        }
        let path = tree
            .path(node.level, ix)
            .into_iter()
            .map(|w| vocab.word(w).to_owned())
            .collect();
        best.insert(
            word,
            ExpansionTerm {
                word: word.to_owned(),
                score,
                prob: node.prob,
                idf,
                path_score: node.score,
                level: node.level,
                path,
            },
        );
    }
    let mut terms: Vec<ExpansionTerm> = best.into_values().collect();
    sort_terms(&mut terms);
    terms
}

fn sort_terms(terms: &mut [ExpansionTerm]) {
    terms.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.word.cmp(&b.word))
    });
}

/// The `n_exp` highest-scoring words, ties broken lexicographically.
pub fn select_expansion(terms: &[ExpansionTerm], n_exp: usize) -> Vec<String> {
    let mut sorted = terms.to_vec();
    sort_terms(&mut sorted);
    sorted.into_iter().take(n_exp).map(|t| t.word).collect()
}
