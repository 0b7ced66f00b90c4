use std::collections::HashMap;

use crate::error::{Error, Result};

/// Word to id map ordered by descending frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    freq: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, count)` pairs that are already in id
    /// order. Rejects duplicates and entries that violate the ordering.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        for (k, pair) in entries.windows(2).enumerate() {
            let (ref w0, c0) = pair[0];
            let (ref w1, c1) = pair[1];
            if c1 > c0 || (c1 == c0 && w1 <= w0) {
                return Err(Error::Format(format!(
                    "vocabulary entries {} and {} are out of order ({w0}:{c0}, {w1}:{c1})",
                    k,
                    k + 1
                )));
            }
        }
        let mut words = Vec::with_capacity(entries.len());
        let mut freq = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (id, (w, c)) in entries.into_iter().enumerate() {
            if index.insert(w.clone(), id as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary word {w:?}")));
            }
            words.push(w);
            freq.push(c);
        }
        Ok(Self { words, freq, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn freq(&self, id: u32) -> u64 {
        self.freq[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(String::as_str).zip(self.freq.iter().copied())
    }
}

/// Counts token frequencies and keeps at most `max_size` words that occur at
/// least `min_count` times.
pub fn build_vocabulary<I, S>(tokens: I, max_size: usize, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if max_size == 0 {
        return Err(Error::InvalidConfig("max_size must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for tok in tokens {
        let tok = tok.as_ref();
        if let Some(c) = counts.get_mut(tok) {
            *c += 1;
        } else {
            counts.insert(tok.to_owned(), 1);
        }
    }
    let mut entries: Vec<(String, u64)> =
        counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(max_size);
    Vocabulary::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn frequency_order() {
        let v = build_vocabulary(toks("a b a c a b"), 10, 0).unwrap();
        assert_eq!(v.words(), ["a", "b", "c"]);
        assert_eq!((v.freq(0), v.freq(1), v.freq(2)), (3, 2, 1));
        for (i, w) in v.words().iter().enumerate() {
            assert_eq!(v.id(w), Some(i as u32));
        }
    }

    #[test]
    fn truncation_and_threshold() {
        let v = build_vocabulary(toks("a b a c a b"), 2, 0).unwrap();
        assert_eq!(v.words(), ["a", "b"]);
        let v = build_vocabulary(toks("a b a"), 10, 2).unwrap();
        assert_eq!(v.words(), ["a"]);
    }

    #[test]
    fn ties_are_lexicographic() {
        let v = build_vocabulary(toks("z y x y z x"), 10, 0).unwrap();
        assert_eq!(v.words(), ["x", "y", "z"]);
    }

    #[test]
    fn empty_after_filter() {
        assert!(matches!(
            build_vocabulary(toks("a b"), 10, 5),
            Err(Error::EmptyVocabulary)
        ));
        assert!(matches!(
            build_vocabulary(Vec::<&str>::new(), 10, 0),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn from_entries_rejects_bad_order() {
        assert!(Vocabulary::from_entries(vec![("a".into(), 1), ("b".into(), 2)]).is_err());
        assert!(Vocabulary::from_entries(vec![("b".into(), 1), ("a".into(), 1)]).is_err());
        assert!(Vocabulary::from_entries(vec![("a".into(), 2), ("b".into(), 1)]).is_ok());
    }
}
