//! Versioned model container shared by both model families.
//!
//! The file is a single JSON document:
//!
//! ```text
//! {"format": "proactive-lm", "version": 1, "vocab": [...], "model": {"kind": "ngram", ...}}
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lstm::{LstmParts, LstmSession};
use super::ngram::{NGramParts, NGramSession};
use super::{LmSession, LstmModel, NGramModel, NextWordModel};
use crate::corpus::{Vocabulary, WordId};
use crate::error::{Error, Result};

const MODEL_FORMAT: &str = "proactive-lm";
const MODEL_VERSION: u32 = 1;

/// Either model family, selected at load time.
#[derive(Debug, Clone, PartialEq)]
pub enum LanguageModel {
    NGram(NGramModel),
    Lstm(LstmModel),
}

impl LanguageModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LanguageModel::NGram(_) => "ngram",
            LanguageModel::Lstm(_) => "lstm",
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = match self {
            LanguageModel::NGram(m) => ModelBody::Ngram(m.to_parts()),
            LanguageModel::Lstm(m) => ModelBody::Lstm(m.to_parts()),
        };
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            vocab: self.vocab().words()[2..].to_vec(),
            model: body,
        };
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, &file)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| Error::format("model", path, e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::format(
                "model",
                path,
                format!("unsupported format {} v{}", file.format, file.version),
            ));
        }
        let vocab = Vocabulary::from_words(file.vocab);
        let bad = |e: Error| Error::format("model", path, e.to_string());
        Ok(match file.model {
            ModelBody::Ngram(p) => LanguageModel::NGram(NGramModel::from_parts(vocab, p).map_err(bad)?),
            ModelBody::Lstm(p) => LanguageModel::Lstm(LstmModel::from_parts(vocab, p).map_err(bad)?),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    /// Vocabulary without the two reserved entries.
    vocab: Vec<String>,
    model: ModelBody,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelBody {
    Ngram(NGramParts),
    Lstm(LstmParts),
}

impl NextWordModel for LanguageModel {
    type Session<'a> = LanguageModelSession<'a>;

    fn vocab(&self) -> &Vocabulary {
        match self {
            LanguageModel::NGram(m) => m.vocab(),
            LanguageModel::Lstm(m) => m.vocab(),
        }
    }

    fn session(&self) -> LanguageModelSession<'_> {
        match self {
            LanguageModel::NGram(m) => LanguageModelSession::NGram(m.session()),
            LanguageModel::Lstm(m) => LanguageModelSession::Lstm(m.session()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum LanguageModelSession<'a> {
    NGram(NGramSession<'a>),
    Lstm(LstmSession<'a>),
}

impl LmSession for LanguageModelSession<'_> {
    fn reset(&mut self) {
        match self {
            LanguageModelSession::NGram(s) => s.reset(),
            LanguageModelSession::Lstm(s) => s.reset(),
        }
    }

    fn feed(&mut self, word: WordId) -> Result<()> {
        match self {
            LanguageModelSession::NGram(s) => s.feed(word),
            LanguageModelSession::Lstm(s) => s.feed(word),
        }
    }

    fn next_distribution(&self) -> Result<Vec<f64>> {
        match self {
            LanguageModelSession::NGram(s) => s.next_distribution(),
            LanguageModelSession::Lstm(s) => s.next_distribution(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::lm::LstmConfig;

    #[test]
    fn both_families_round_trip_through_a_file() {
        let docs = [Document::new("a", "neural nets learn. nets learn fast")];
        let vocab = Vocabulary::build(&docs, 50).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let ngram = LanguageModel::NGram(NGramModel::train(&docs, &vocab, 3, 0.1).unwrap());
        let p = dir.path().join("ngram.json");
        ngram.save(&p).unwrap();
        assert_eq!(LanguageModel::load(&p).unwrap(), ngram);

        let cfg = LstmConfig {
            hidden: 4,
            embed: 3,
            ..LstmConfig::default()
        };
        let lstm = LanguageModel::Lstm(LstmModel::new(vocab, cfg).unwrap());
        let p = dir.path().join("lstm.json");
        lstm.save(&p).unwrap();
        let back = LanguageModel::load(&p).unwrap();
        assert_eq!(back, lstm);
        assert_eq!(back.kind(), "lstm");
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"format":"other","version":1,"vocab":[],"model":{"kind":"ngram","order":1,"alpha":0.1,"tables":[[]]}}"#).unwrap();
        assert!(matches!(LanguageModel::load(&p), Err(Error::Format { .. })));
    }
}
