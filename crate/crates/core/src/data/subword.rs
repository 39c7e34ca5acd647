//! Byte-pair-encoding subword inventory with greedy longest-match inference.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::vocab::tokenize_words;
use super::DataError;

pub const SUB_PAD_ID: u32 = 0;
pub const SUB_UNK_ID: u32 = 1;
pub const SUB_CLS_ID: u32 = 2;
pub const SUB_MASK_ID: u32 = 3;
/// Number of reserved subword ids (PAD, UNK, CLS, MASK).
pub const SUB_RESERVED: u32 = 4;

/// Merge-ranked subword inventory. Ids: reserved, then single characters in
/// lexicographic order, then merged units in merge order. Inference is
/// greedy longest-match per word, so the inventory alone reconstructs the
/// tokenizer; the merge pair list is kept only for inspection.
#[derive(Debug, Clone)]
pub struct SubwordVocabulary {
    units: Vec<String>,
    unit_to_id: HashMap<String, u32>,
    alphabet: BTreeSet<char>,
    max_unit_chars: usize,
    merges: Vec<(String, String)>,
}

impl SubwordVocabulary {
    /// Standard BPE merge learning over word-internal character pairs.
    /// Ties on pair count break to the lexicographically smallest pair.
    pub fn learn<I, S>(corpus: I, num_merges: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut word_freq: BTreeMap<String, u64> = BTreeMap::new();
        for text in corpus {
            for tok in tokenize_words(text.as_ref()) {
                *word_freq.entry(tok).or_insert(0) += 1;
            }
        }

        let mut words: Vec<(Vec<String>, u64)> = word_freq
            .into_iter()
            .map(|(w, c)| (w.chars().map(|ch| ch.to_string()).collect(), c))
            .collect();

        let mut merges = Vec::new();
        for _ in 0..num_merges {
            let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
            for (symbols, freq) in &words {
                for win in symbols.windows(2) {
                    *pair_counts
                        .entry((win[0].clone(), win[1].clone()))
                        .or_insert(0) += freq;
                }
            }
            // BTreeMap iterates in ascending key order, so strict > keeps the
            // lexicographically smallest pair among equal counts.
            let mut best: Option<(&(String, String), u64)> = None;
            for (pair, &count) in &pair_counts {
                if best.map_or(true, |(_, c)| count > c) {
                    best = Some((pair, count));
                }
            }
            let Some((pair, _)) = best else { break };
            let pair = pair.clone();
            let merged = format!("{}{}", pair.0, pair.1);
            for (symbols, _) in &mut words {
                let mut i = 0;
                while i + 1 < symbols.len() {
                    if symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
                        symbols[i] = merged.clone();
                        symbols.remove(i + 1);
                    } else {
                        i += 1;
                    }
                }
            }
            merges.push(pair);
        }

        let mut alphabet = BTreeSet::new();
        for (symbols, _) in &words {
            for s in symbols {
                for ch in s.chars() {
                    alphabet.insert(ch);
                }
            }
        }

        let mut units: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
        for (a, b) in &merges {
            let unit = format!("{a}{b}");
            if !units.contains(&unit) {
                units.push(unit);
            }
        }
        Self::from_units(units, merges)
    }

    pub fn from_units(units: Vec<String>, merges: Vec<(String, String)>) -> Self {
        let unit_to_id = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i as u32 + SUB_RESERVED))
            .collect();
        let alphabet = units
            .iter()
            .filter(|u| u.chars().count() == 1)
            .map(|u| u.chars().next().unwrap())
            .collect();
        let max_unit_chars = units.iter().map(|u| u.chars().count()).max().unwrap_or(1);
        SubwordVocabulary { units, unit_to_id, alphabet, max_unit_chars, merges }
    }

    /// Total id count including the four reserved ids.
    pub fn size(&self) -> usize {
        self.units.len() + SUB_RESERVED as usize
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn unit_id(&self, unit: &str) -> Option<u32> {
        self.unit_to_id.get(unit).copied()
    }

    pub fn unit(&self, id: u32) -> Option<&str> {
        if id < SUB_RESERVED {
            return ["<pad>", "<unk>", "<cls>", "<mask>"].get(id as usize).copied();
        }
        self.units.get((id - SUB_RESERVED) as usize).map(|s| s.as_str())
    }

    /// Greedy longest-match segmentation of one word into surface forms.
    /// Characters outside the learned alphabet produce `None` entries.
    pub fn segment_word(&self, word: &str) -> Vec<Option<String>> {
        let chars: Vec<char> = word.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if !self.alphabet.contains(&chars[i]) {
                out.push(None);
                i += 1;
                continue;
            }
            let mut len = self.max_unit_chars.min(chars.len() - i);
            loop {
                let cand: String = chars[i..i + len].iter().collect();
                if self.unit_to_id.contains_key(&cand) {
                    out.push(Some(cand));
                    i += len;
                    break;
                }
                len -= 1;
                debug_assert!(len > 0, "single alphabet char must be a unit");
            }
        }
        out
    }

    /// CLS followed by the greedy segmentation of each word, truncated from
    /// the right at `max_len` content tokens.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<u32> {
        let mut ids = vec![SUB_CLS_ID];
        'outer: for word in tokenize_words(text) {
            for piece in self.segment_word(&word) {
                if ids.len() > max_len {
                    break 'outer;
                }
                ids.push(match piece {
                    Some(unit) => self.unit_to_id[&unit],
                    None => SUB_UNK_ID,
                });
            }
        }
        ids.truncate(max_len + 1);
        ids
    }

    /// One unit per line; line number = id minus the reserved offset.
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for u in &self.units {
            writeln!(f, "{u}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let units = f.lines().collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_units(units, Vec::new()))
    }
}
