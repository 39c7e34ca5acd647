//! Word tokenization and the word-level vocabulary.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::DataError;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
/// Number of reserved word ids (PAD, UNK).
pub const WORD_RESERVED: u32 = 2;

/// Lowercased maximal runs of Unicode alphanumerics; punctuation dropped.
pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                cur.push(lc);
            }
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Token ids assigned by descending frequency (ties lexicographic), after
/// the reserved PAD/UNK slots.
#[derive(Debug, Clone)]
pub struct WordVocabulary {
    tokens: Vec<String>,
    token_to_id: HashMap<String, u32>,
}

impl WordVocabulary {
    pub fn build<I, S>(corpus: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        assert!(min_count >= 1, "min_count must be at least 1");
        let mut counts: HashMap<String, u64> = HashMap::new();
        for text in corpus {
            for tok in tokenize_words(text.as_ref()) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c as usize >= min_count)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_tokens(entries.into_iter().map(|(t, _)| t).collect())
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let token_to_id = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + WORD_RESERVED))
            .collect();
        WordVocabulary { tokens, token_to_id }
    }

    /// Total id count including PAD and UNK.
    pub fn size(&self) -> usize {
        self.tokens.len() + WORD_RESERVED as usize
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        match id {
            PAD_ID => Some("<pad>"),
            UNK_ID => Some("<unk>"),
            _ => self.tokens.get((id - WORD_RESERVED) as usize).map(|s| s.as_str()),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokenize and map to ids, truncating from the right at `max_len`.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<u32> {
        tokenize_words(text)
            .into_iter()
            .take(max_len)
            .map(|t| self.id(&t))
            .collect()
    }

    /// One token per line; line number = id minus the reserved offset.
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for t in &self.tokens {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let tokens = f.lines().collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_tokens(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(tokenize_words("Cloud Computing"), vec!["cloud", "computing"]);
        assert_eq!(
            tokenize_words("ask for recommendation"),
            vec!["ask", "for", "recommendation"]
        );
        assert_eq!(tokenize_words(""), Vec::<String>::new());
        assert_eq!(tokenize_words("C++ & java-script!"), vec!["c", "java", "script"]);
        assert_eq!(tokenize_words("w12 x9"), vec!["w12", "x9"]);
    }

    #[test]
    fn tokenize_idempotent_under_rejoin() {
        for text in ["Hello,   World! 42", "ünïcode Déjà-vu", "", "a.b.c"] {
            let once = tokenize_words(text);
            let again = tokenize_words(&once.join(" "));
            assert_eq!(once, again);
        }
    }

    #[test]
    fn vocab_frequency_filter() {
        let v = WordVocabulary::build(["a a b"], 2);
        assert_eq!(v.size(), 3); // PAD, UNK, "a"
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), UNK_ID);
    }

    #[test]
    fn vocab_empty_corpus() {
        let v = WordVocabulary::build(Vec::<String>::new(), 1);
        assert_eq!(v.size(), 2);
    }

    #[test]
    fn vocab_ids_by_frequency_then_lexicographic() {
        let v = WordVocabulary::build(["x y", "y z"], 1);
        assert_eq!(v.id("y"), 2);
        assert_eq!(v.id("x"), 3);
        assert_eq!(v.id("z"), 4);
    }

    #[test]
    fn encode_truncates_right() {
        let v = WordVocabulary::build(["a b c d"], 1);
        let ids = v.encode("a b c d", 2);
        assert_eq!(ids, vec![v.id("a"), v.id("b")]);
    }

    #[test]
    fn save_load_roundtrip() {
        let v = WordVocabulary::build(["gamma beta alpha alpha beta"], 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        let w = WordVocabulary::load(&p).unwrap();
        assert_eq!(v.tokens(), w.tokens());
        assert_eq!(w.id("alpha"), v.id("alpha"));
    }
}
