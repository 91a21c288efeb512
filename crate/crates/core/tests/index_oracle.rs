//! Inverted-index search against dense brute-force cosine similarity.

#[path = "support/oracles.rs"]
mod oracles;

use proactive_core::corpus::{CorpusStats, Document};
use proactive_core::index::{InvertedIndex, WeightedQuery};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn search_matches_brute_force_on_random_corpora() {
    oracles::index_equivalence(80, 7).unwrap();
}

#[test]
fn document_term_counts_rank_that_document_first() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let docs = oracles::random_docs(&mut rng);
        let Some(d) = docs.iter().find(|d| !d.tokens().is_empty()) else { continue };
        let stats = CorpusStats::compute(&docs);
        let index = InvertedIndex::build(&docs, &stats).unwrap();
        let hits = index.search(&WeightedQuery::from_words(&d.tokens()), 200).hits;
        let own = hits.iter().find(|h| h.doc_id == d.id).unwrap();
        assert!((own.score - 1.0).abs() <= 1e-9);
        assert!((hits[0].score - 1.0).abs() <= 1e-9);
    }
}

// Adding a term found only in document d can lower d's raw cosine (the query
// norm grows faster than the dot product, e.g. docs "a" and "a a a u" with
// query "a" plus u at weight 2), but every other score shrinks by the same
// factor, so d's rank can only improve.
proptest! {
    #[test]
    fn adding_a_unique_term_never_worsens_its_document_rank(
        texts in prop::collection::vec("[a-d]( [a-d]){0,6}", 2..8),
        weight in 0.1f64..5.0,
        target in 0usize..8,
    ) {
        let target = target % texts.len();
        let mut docs: Vec<Document> = texts.iter().enumerate().map(|(i, t)| Document::new(format!("d{i}"), t.clone())).collect();
        docs[target].text.push_str(" uniqueterm");
        let stats = CorpusStats::compute(&docs);
        let index = InvertedIndex::build(&docs, &stats).unwrap();
        let q = WeightedQuery::from_words(&["a", "b"]);
        let rank = |q: &WeightedQuery| index.search(q, 100).hits.iter().position(|h| h.doc == target).unwrap_or(usize::MAX);
        let mut q2 = q.clone();
        q2.add("uniqueterm", weight);
        prop_assert!(rank(&q2) <= rank(&q));
    }
}
