//! Documents, tokenization, vocabulary and document-frequency statistics.
//!
//! # File formats
//!
//! Corpus files are UTF-8 JSON lines, one document per line:
//!
//! ```text
//! {"id": "d1", "title": "...", "text": "...", "topics": ["cs.LG", "cs.IR"]}
//! ```
//!
//! The vocabulary file is tab-separated text. The first line is a versioned
//! header, followed by one `index<TAB>word` line per entry in index order:
//!
//! ```text
//! proactive-vocab	v1	4
//! 0	<unk>
//! 1	<eos>
//! 2	learning
//! 3	machine
//! ```
//!
//! The statistics file has a header, the document count, then one
//! `word<TAB>doc_freq` line per word in lexicographic order:
//!
//! ```text
//! proactive-stats	v1
//! num_docs	200
//! learning	25
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

const VOCAB_HEADER: &str = "proactive-vocab";
const STATS_HEADER: &str = "proactive-stats";
const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub topics: BTreeSet<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: String::new(),
            text: text.into(),
            topics: BTreeSet::new(),
        }
    }

    pub fn with_topics<I, S>(mut self, topics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.topics = topics.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }

    pub fn shares_topic(&self, other: &Document) -> bool {
        !self.topics.is_disjoint(&other.topics)
    }
}

/// Lowercases `text` and splits it on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Splits `text` at sentence-final punctuation and tokenizes each sentence.
/// Empty sentences are dropped.
pub fn sentences(text: &str) -> Vec<Vec<String>> {
    text.split(['.', '!', '?', '\n'])
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect()
}

/// An ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if d.id.is_empty() {
                return Err(Error::InvalidInput(format!("document #{i} has an empty id")));
            }
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate document id {:?}", d.id)));
            }
        }
        Ok(Self { docs, by_id })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn has_topics(&self) -> bool {
        self.docs.iter().all(|d| !d.topics.is_empty())
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut docs = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(&line).map_err(|e| {
                Error::format("corpus", path, format!("line {}: {e}", lineno + 1))
            })?;
            docs.push(doc);
        }
        Self::new(docs)
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for d in &self.docs {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordId(pub usize);

impl WordId {
    pub const UNK: WordId = WordId(0);
    pub const EOS: WordId = WordId(1);

    pub fn index(self) -> usize {
        self.0
    }
}

/// Bijective word/index map with reserved `<unk>` and `<eos>` entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    /// Keeps the `max_size - 2` most frequent tokens (ties broken
    /// lexicographically) plus the two reserved tokens.
    pub fn build(docs: &[Document], max_size: usize) -> Result<Self> {
        if max_size < 3 {
            return Err(Error::InvalidParameter(format!(
                "vocabulary size must be at least 3, got {max_size}"
            )));
        }
        if docs.is_empty() {
            return Err(Error::InvalidInput("cannot build a vocabulary from no documents".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for d in docs {
            for t in d.tokens() {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - 2);
        Ok(Self::from_words(ranked.into_iter().map(|(w, _)| w)))
    }

    /// Builds a vocabulary from explicit words, prepending the reserved
    /// tokens. Duplicates and reserved tokens in `words` are skipped.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self {
            words: Vec::new(),
            index: HashMap::new(),
        };
        v.push(UNK.to_owned());
        v.push(EOS.to_owned());
        for w in words {
            v.push(w.into());
        }
        v
    }

    fn push(&mut self, word: String) {
        if self.index.contains_key(&word) {
            return;
        }
        self.index.insert(word.clone(), WordId(self.words.len()));
        self.words.push(word);
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Maps `word` to its id, or to `<unk>` when out of vocabulary.
    pub fn id(&self, word: &str) -> WordId {
        self.index.get(word).copied().unwrap_or(WordId::UNK)
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id.0]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<WordId> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// The training token stream: every sentence of every document followed
    /// by `<eos>`.
    pub fn token_stream(&self, docs: &[Document]) -> Vec<WordId> {
        let mut out = Vec::new();
        for d in docs {
            for s in sentences(&d.text) {
                out.extend(s.iter().map(|t| self.id(t)));
                out.push(WordId::EOS);
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{VOCAB_HEADER}\t{FORMAT_VERSION}\t{}", self.len()).map_err(io)?;
        for (i, word) in self.words.iter().enumerate() {
            writeln!(w, "{i}\t{word}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |reason: String| Error::format("vocabulary", path, reason);
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 3 || fields[0] != VOCAB_HEADER || fields[1] != FORMAT_VERSION {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let expected: usize = fields[2].parse().map_err(|_| bad("bad size in header".into()))?;
        let mut words = Vec::with_capacity(expected);
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let (idx, word) = line
                .split_once('\t')
                .ok_or_else(|| bad(format!("malformed entry {line:?}")))?;
            if idx.parse::<usize>().ok() != Some(words.len()) {
                return Err(bad(format!("entry out of order: {line:?}")));
            }
            words.push(word.to_owned());
        }
        if words.len() != expected || words.len() < 2 || words[0] != UNK || words[1] != EOS {
            return Err(bad("size mismatch or missing reserved tokens".into()));
        }
        let vocab = Self::from_words(words.into_iter().skip(2));
        if vocab.len() != expected {
            return Err(bad("duplicate entries".into()));
        }
        Ok(vocab)
    }
}

/// Document count and per-word document frequencies over every token of a
/// corpus. `idf(w) = N / N_w`, the raw ratio with no logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    num_docs: usize,
    doc_freq: HashMap<String, u32>,
}

impl CorpusStats {
    pub fn compute(docs: &[Document]) -> Self {
        let mut doc_freq: HashMap<String, u32> = HashMap::new();
        for d in docs {
            let distinct: HashSet<String> = d.tokens().into_iter().collect();
            for t in distinct {
                *doc_freq.entry(t).or_default() += 1;
            }
        }
        Self {
            num_docs: docs.len(),
            doc_freq,
        }
    }

    pub fn from_parts(num_docs: usize, doc_freq: HashMap<String, u32>) -> Self {
        Self { num_docs, doc_freq }
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn doc_freq(&self, word: &str) -> u32 {
        self.doc_freq.get(word).copied().unwrap_or(0)
    }

    pub fn idf(&self, word: &str) -> Option<f64> {
        match self.doc_freq(word) {
            0 => None,
            df => Some(self.num_docs as f64 / f64::from(df)),
        }
    }

    pub fn num_terms(&self) -> usize {
        self.doc_freq.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, u32)> {
        self.doc_freq.iter().map(|(w, &df)| (w.as_str(), df))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{STATS_HEADER}\t{FORMAT_VERSION}").map_err(io)?;
        writeln!(w, "num_docs\t{}", self.num_docs).map_err(io)?;
        let sorted: BTreeMap<&String, &u32> = self.doc_freq.iter().collect();
        for (word, df) in sorted {
            writeln!(w, "{word}\t{df}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |reason: String| Error::format("stats", path, reason);
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("truncated file".into()))?
                .map_err(|e| Error::io(path, e))
        };
        let header = next()?;
        if header != format!("{STATS_HEADER}\t{FORMAT_VERSION}") {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let n_line = next()?;
        let num_docs = n_line
            .strip_prefix("num_docs\t")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad(format!("expected num_docs line, got {n_line:?}")))?;
        let mut doc_freq = HashMap::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let (word, df) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad(format!("malformed entry {line:?}")))?;
            let df: u32 = df.parse().map_err(|_| bad(format!("bad count in {line:?}")))?;
            if df == 0 || df as usize > num_docs {
                return Err(bad(format!("document frequency out of range in {line:?}")));
            }
            doc_freq.insert(word.to_owned(), df);
        }
        Ok(Self { num_docs, doc_freq })
    }
}
