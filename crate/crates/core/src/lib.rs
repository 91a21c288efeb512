//! Proactive information retrieval from written context.
//!
//! The pipeline observes a sliding window of the most recent words a user
//! has written, optionally expands it with predicted or intent-related words,
//! and retrieves documents from a tf-idf cosine index without any explicit
//! query from the user.
//!
//! ```text
//!  written words ──► ContextWindow ──┬──────────────────────────────┐
//!                                    │                              │
//!                                    ├─► beam::expand (next-word LM)│
//!                                    │     └─► score idf·p ─► top n_exp
//!                                    │                              │
//!                                    └─► intent::LinRel (UCB)       │
//!                                          └─► ŷ + c·σ̂ ─► top n_exp │
//!                                                                   ▼
//!                                         WeightedQuery ──► index::search
//! ```
//!
//! Modules:
//! - [`corpus`]: documents, tokenization, vocabulary, document-frequency statistics.
//! - [`index`]: inverted index with tf-idf cosine ranking.
//! - [`lm`]: next-word models (add-α backoff n-gram and a word-level LSTM).
//! - [`beam`]: pruned prediction tree and expansion-word scoring.
//! - [`intent`]: LinRel user intent model with upper-confidence-bound selection.
//! - [`proactive`]: query assembly from a window and an expander.
//! - [`sim`]: exploratory and known-item simulations, synthetic corpora, reports.

pub mod beam;
pub mod corpus;
pub mod error;
pub mod index;
pub mod intent;
pub mod lm;
pub mod proactive;
pub mod sim;
pub mod stopwords;

pub use error::{Error, Result};
