//! Inverted index with tf-idf cosine ranking.
//!
//! Document vectors weight each term by raw term frequency times the corpus
//! idf (`N / N_w`). Query weights play the role of term frequencies and are
//! scaled by the same idf, so a query built from a document's own term
//! counts has cosine 1 with that document.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, Document};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 10;

const INDEX_FORMAT: &str = "proactive-index";
const INDEX_VERSION: u32 = 1;

/// Term → nonnegative weight. Iteration order is lexicographic by term.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedQuery {
    weights: BTreeMap<String, f64>,
}

impl WeightedQuery {
    pub fn new() -> Self {
        Self::default()
    }

    /// One unit of weight per occurrence.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let mut q = Self::new();
        for w in words {
            q.add(w.as_ref(), 1.0);
        }
        q
    }

    /// Adds `weight` to `term`. Negative and non-finite weights are ignored.
    pub fn add(&mut self, term: &str, weight: f64) {
        if weight.is_finite() && weight >= 0.0 {
            *self.weights.entry(term.to_owned()).or_default() += weight;
        }
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.weights.contains_key(term)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(t, &w)| (t.as_str(), w))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_searchable(&self) -> bool {
        self.weights.values().any(|&w| w > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    /// Position of the document in the indexed corpus.
    pub doc: usize,
    pub score: f64,
}

/// Ranked hits, scores non-increasing, ties by ascending document id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub hits: Vec<Hit>,
}

impl SearchResult {
    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn contains_doc(&self, doc: usize) -> bool {
        self.hits.iter().any(|h| h.doc == doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TermEntry {
    idf: f64,
    /// (document position, term frequency), sorted by position.
    postings: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_norms: Vec<f64>,
    terms: HashMap<String, TermEntry>,
}

impl InvertedIndex {
    /// `stats` must have been computed over `docs`.
    pub fn build(docs: &[Document], stats: &CorpusStats) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty corpus".into()));
        }
        let mut terms: HashMap<String, TermEntry> = HashMap::new();
        let mut doc_norms = Vec::with_capacity(docs.len());
        for (pos, d) in docs.iter().enumerate() {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in d.tokens() {
                *tf.entry(t).or_default() += 1;
            }
            let mut sq = 0.0;
            for (term, count) in tf {
                let idf = stats.idf(&term).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "term {term:?} of document {:?} missing from corpus stats",
                        d.id
                    ))
                })?;
                let w = f64::from(count) * idf;
                sq += w * w;
                terms
                    .entry(term)
                    .or_insert_with(|| TermEntry {
                        idf,
                        postings: Vec::new(),
                    })
                    .postings
                    .push((pos as u32, count));
            }
            doc_norms.push(sq.sqrt());
        }
        Ok(Self {
            doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
            doc_norms,
            terms,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_id(&self, doc: usize) -> &str {
        &self.doc_ids[doc]
    }

    pub fn doc_norm(&self, doc: usize) -> f64 {
        self.doc_norms[doc]
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.terms.get(term).map(|e| e.idf)
    }

    /// Postings of `term` as (document position, term frequency).
    pub fn postings(&self, term: &str) -> &[(u32, u32)] {
        self.terms.get(term).map_or(&[], |e| &e.postings)
    }

    pub fn search(&self, query: &WeightedQuery, top_k: usize) -> SearchResult {
        self.search_filtered(query, top_k, |_| true)
    }

    /// Like [`search`](Self::search) but only documents for which `keep`
    /// returns true may appear in the result.
    pub fn search_filtered(
        &self,
        query: &WeightedQuery,
        top_k: usize,
        keep: impl Fn(usize) -> bool,
    ) -> SearchResult {
        let mut dot = vec![0.0f64; self.doc_ids.len()];
        let mut touched = vec![false; self.doc_ids.len()];
        let mut q_sq = 0.0;
        for (term, weight) in query.iter() {
            let Some(entry) = self.terms.get(term) else {
                continue;
            };
            let qw = weight * entry.idf;
            if qw == 0.0 {
                continue;
            }
            q_sq += qw * qw;
            for &(doc, tf) in &entry.postings {
                let doc = doc as usize;
                dot[doc] += qw * f64::from(tf) * entry.idf;
                touched[doc] = true;
            }
        }
        if q_sq == 0.0 || top_k == 0 {
            return SearchResult::default();
        }
        let q_norm = q_sq.sqrt();
        let mut hits: Vec<Hit> = (0..self.doc_ids.len())
            .filter(|&d| touched[d] && keep(d))
            .map(|d| Hit {
                doc_id: self.doc_ids[d].clone(),
                doc: d,
                score: dot[d] / (q_norm * self.doc_norms[d]),
            })
            .collect();
        let cmp = |a: &Hit, b: &Hit| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        };
        if hits.len() > top_k {
            hits.select_nth_unstable_by(top_k - 1, cmp);
            hits.truncate(top_k);
        }
        hits.sort_by(cmp);
        SearchResult { hits }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut terms: Vec<(&String, &TermEntry)> = self.terms.iter().collect();
        terms.sort_by(|a, b| a.0.cmp(b.0));
        let file = IndexFile {
            format: INDEX_FORMAT.to_owned(),
            version: INDEX_VERSION,
            doc_ids: self.doc_ids.clone(),
            doc_norms: self.doc_norms.clone(),
            terms: terms
                .into_iter()
                .map(|(t, e)| (t.clone(), e.clone()))
                .collect(),
        };
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, &file)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let file: IndexFile = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| Error::format("index", path, e.to_string()))?;
        if file.format != INDEX_FORMAT || file.version != INDEX_VERSION {
            return Err(Error::format(
                "index",
                path,
                format!("unsupported format {} v{}", file.format, file.version),
            ));
        }
        if file.doc_ids.len() != file.doc_norms.len() {
            return Err(Error::format("index", path, "document table length mismatch"));
        }
        let n = file.doc_ids.len() as u32;
        if file
            .terms
            .iter()
            .any(|(_, e)| e.postings.iter().any(|&(d, _)| d >= n))
        {
            return Err(Error::format("index", path, "posting refers to unknown document"));
        }
        Ok(Self {
            doc_ids: file.doc_ids,
            doc_norms: file.doc_norms,
            terms: file.terms.into_iter().collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    doc_ids: Vec<String>,
    doc_norms: Vec<f64>,
    terms: Vec<(String, TermEntry)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(texts: &[&str]) -> InvertedIndex {
        let docs: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), *t))
            .collect();
        InvertedIndex::build(&docs, &CorpusStats::compute(&docs)).unwrap()
    }

    #[test]
    fn raw_term_frequencies_are_posted() {
        let idx = build(&["a a b"]);
        assert_eq!(idx.postings("a"), &[(0, 2)]);
        assert_eq!(idx.postings("b"), &[(0, 1)]);
        // single document: idf = 1 for both terms
        assert!((idx.doc_norm(0) - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stopword_only_documents_are_indexed() {
        let idx = build(&["the of and", "neural nets"]);
        assert_eq!(idx.postings("the"), &[(0, 1)]);
        let r = idx.search(&WeightedQuery::from_words(&["the"]), 10);
        assert_eq!(r.hits[0].doc_id, "d0");
    }

    #[test]
    fn own_term_counts_score_one() {
        let texts = ["neural nets learn", "nets nets retrieval", "retrieval of documents"];
        let idx = build(&texts);
        let q = WeightedQuery::from_words(&crate::corpus::tokenize(texts[1]));
        let r = idx.search(&q, DEFAULT_TOP_K);
        assert_eq!(r.hits[0].doc_id, "d1");
        assert!((r.hits[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn all_zero_query_returns_empty() {
        let idx = build(&["a b", "c"]);
        assert!(idx.search(&WeightedQuery::new(), 10).is_empty());
        let mut q = WeightedQuery::new();
        q.add("a", 0.0);
        assert!(!q.is_searchable());
        assert!(idx.search(&q, 10).is_empty());
        assert!(idx.search(&WeightedQuery::from_words(&["zzz"]), 10).is_empty());
    }

    #[test]
    fn ties_break_by_doc_id_and_top_k_truncates() {
        let idx = build(&["x y", "x y", "x y", "z"]);
        let r = idx.search(&WeightedQuery::from_words(&["x"]), 2);
        let ids: Vec<&str> = r.hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, ["d0", "d1"]);
    }

    #[test]
    fn filter_excludes_documents() {
        let idx = build(&["x y", "x", "y"]);
        let r = idx.search_filtered(&WeightedQuery::from_words(&["x"]), 10, |d| d != 1);
        assert_eq!(r.len(), 1);
        assert_eq!(r.hits[0].doc_id, "d0");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let stats = CorpusStats::compute(&[]);
        assert!(matches!(
            InvertedIndex::build(&[], &stats),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let idx = build(&["alpha beta", "beta gamma gamma"]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("index.json");
        idx.save(&p).unwrap();
        assert_eq!(InvertedIndex::load(&p).unwrap(), idx);
    }
}
