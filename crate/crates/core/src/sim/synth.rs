//! Synthetic topic-labelled corpora.
//!
//! The vocabulary is split into one block of topic words per topic and a
//! shared tail. A document of topic `t` draws each token independently:
//! with probability `topic_mass` from topic `t`'s block, otherwise from the
//! shared tail, Zipf-weighted within either part. The most frequent tail
//! entries are common English function words so that stop-word handling is
//! exercised.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

const FUNCTION_WORDS: &[&str] = &["the", "of", "and", "a", "to", "in", "is", "for", "that", "with"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub vocab_size: usize,
    pub doc_length: usize,
    pub sentence_length: usize,
    pub topic_mass: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// The acceptance corpus: 5 topics, 200 documents, 500 words, length 60.
    fn default() -> Self {
        Self {
            topics: 5,
            docs_per_topic: 40,
            vocab_size: 500,
            doc_length: 60,
            sentence_length: 12,
            topic_mass: 0.5,
            zipf_exponent: 1.0,
            seed: 42,
        }
    }
}

pub fn topic_label(t: usize) -> String {
    format!("topic-{t}")
}

pub fn synth_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    if cfg.topics == 0 || cfg.docs_per_topic == 0 || cfg.vocab_size == 0 || cfg.doc_length == 0 {
        return Err(Error::InvalidParameter("synthetic corpus counts must all be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.topic_mass) {
        return Err(Error::InvalidParameter("topic mass must lie in [0, 1]".into()));
    }
    let block = (cfg.vocab_size / (2 * cfg.topics)).max(1);
    let tail = cfg.vocab_size.saturating_sub(block * cfg.topics).max(1);
    let words: Vec<String> = (0..block * cfg.topics + tail)
        .map(|i| {
            let tail_rank = i.checked_sub(block * cfg.topics);
            match tail_rank {
                Some(r) if r < FUNCTION_WORDS.len() => FUNCTION_WORDS[r].to_owned(),
                _ => format!("w{i:04}"),
            }
        })
        .collect();
    let zipf = |n: usize| {
        WeightedIndex::new((1..=n).map(|r| 1.0 / (r as f64).powf(cfg.zipf_exponent)))
            .expect("positive weights")
    };
    let block_dist = zipf(block);
    let tail_dist = zipf(tail);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.topics * cfg.docs_per_topic;
    let mut docs = Vec::with_capacity(total);
    for i in 0..total {
        let t = i % cfg.topics;
        let mut text = String::new();
        for pos in 0..cfg.doc_length {
            let w = if rng.gen_bool(cfg.topic_mass) {
                t * block + block_dist.sample(&mut rng)
            } else {
                block * cfg.topics + tail_dist.sample(&mut rng)
            };
            if pos > 0 {
                text.push(' ');
            }
            text.push_str(&words[w]);
            let end_of_sentence = cfg.sentence_length > 0 && (pos + 1) % cfg.sentence_length == 0;
            if end_of_sentence || pos + 1 == cfg.doc_length {
                text.push('.');
            }
        }
        docs.push(
            Document::new(format!("doc-{i:05}"), text)
                .with_title(format!("Synthetic document {i} ({})", topic_label(t)))
                .with_topics([topic_label(t)]),
        );
    }
    Corpus::new(docs)
}
