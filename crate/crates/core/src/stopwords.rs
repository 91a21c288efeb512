//! Fixed English stop-word list used to filter expansion candidates and the
//! rows of the LinRel term-document matrix.

use std::collections::HashSet;
use std::sync::OnceLock;

/// Bumped whenever [`ENGLISH`] changes, so persisted artifacts can record
/// which list filtered them.
pub const VERSION: u32 = 1;

pub const ENGLISH: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any",
    "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "couldn", "d", "did", "didn", "do", "does", "doesn", "doing",
    "don", "down", "during", "each", "few", "for", "from", "further", "had", "hadn", "has",
    "hasn", "have", "haven", "having", "he", "her", "here", "hers", "herself", "him", "himself",
    "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself", "just", "ll", "m",
    "ma", "me", "mightn", "more", "most", "mustn", "my", "myself", "needn", "no", "nor", "not",
    "now", "o", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves",
    "out", "over", "own", "re", "s", "same", "shan", "she", "should", "shouldn", "so", "some",
    "such", "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "ve",
    "very", "was", "wasn", "we", "were", "weren", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "won", "wouldn", "y", "you", "your", "yours",
    "yourself", "yourselves", "also", "may", "us", "via", "would", "could", "however", "thus",
];

/// A set of words excluded from expansion.
#[derive(Debug, Clone, Default)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn english() -> &'static StopWords {
        static LIST: OnceLock<StopWords> = OnceLock::new();
        LIST.get_or_init(|| StopWords::from_words(ENGLISH.iter().copied()))
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            words: words.into_iter().map(str::to_owned).collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_has_no_duplicates_and_is_lowercase() {
        let set: HashSet<_> = ENGLISH.iter().collect();
        assert_eq!(set.len(), ENGLISH.len());
        assert!(ENGLISH.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
        assert!(ENGLISH.len() >= 150);
    }

    #[test]
    fn common_function_words_are_stopped() {
        let sw = StopWords::english();
        for w in ["of", "the", "is", "and", "that"] {
            assert!(sw.contains(w), "{w}");
        }
        assert!(!sw.contains("network"));
    }
}
