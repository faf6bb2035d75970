use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    EOS_ID, FIRST_WORD_ID, MARKER_INTENT, MARKER_REWRITE, MARKER_SNIPPET, MARKER_TITLE, PAD_ID,
    UNK_ID,
};

/// Whitespace + lowercase wordpiece tokenizer over a corpus-derived
/// vocabulary. Ids below [`FIRST_WORD_ID`] are reserved (PAD, EOS, UNK,
/// segment markers). A word missing from the vocabulary is segmented
/// greedily into the longest known pieces; runs with no known piece
/// collapse to a single UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    vocab_size: usize,
    word_to_id: BTreeMap<String, u32>,
    id_to_word: Vec<String>,
}

impl Tokenizer {
    /// Build from raw texts: words ranked by frequency (ties alphabetical),
    /// truncated to the space left after reserved ids.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, vocab_size: usize) -> Result<Self> {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for text in texts {
            for word in text.split_whitespace() {
                *counts.entry(word.to_lowercase()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let capacity = vocab_size.saturating_sub(FIRST_WORD_ID as usize);
        ranked.truncate(capacity);
        let mut words: Vec<String> = ranked.into_iter().map(|(w, _)| w).collect();
        // Stable id assignment independent of frequency noise.
        words.sort();
        Self::from_words(words, vocab_size)
    }

    /// Rebuild from a saved word list; word at position i gets id
    /// FIRST_WORD_ID + i.
    pub fn from_words(words: Vec<String>, vocab_size: usize) -> Result<Self> {
        let capacity = vocab_size.saturating_sub(FIRST_WORD_ID as usize);
        if words.len() > capacity {
            return Err(Error::Config(format!(
                "{} vocabulary words exceed the {capacity} slots left by reserved ids",
                words.len()
            )));
        }
        let mut word_to_id = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid vocabulary word {w:?}")));
            }
            if word_to_id.insert(w.clone(), FIRST_WORD_ID + i as u32).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Tokenizer {
            vocab_size,
            word_to_id,
            id_to_word: words,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Learned words in id order (for persistence).
    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }

    pub fn contains(&self, word: &str) -> bool {
        self.word_to_id.contains_key(word)
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    /// Tokenize a text: lowercase, split on whitespace, per-word encode.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for word in text.split_whitespace() {
            self.encode_word(&word.to_lowercase(), &mut ids);
        }
        ids
    }

    fn encode_word(&self, word: &str, out: &mut Vec<u32>) {
        if let Some(&id) = self.word_to_id.get(word) {
            out.push(id);
            return;
        }
        // Greedy longest-piece segmentation over char boundaries.
        let chars: Vec<char> = word.chars().collect();
        let mut i = 0;
        let mut in_unknown_run = false;
        while i < chars.len() {
            let mut matched = None;
            for end in (i + 1..=chars.len()).rev() {
                let piece: String = chars[i..end].iter().collect();
                if let Some(&id) = self.word_to_id.get(&piece) {
                    matched = Some((id, end));
                    break;
                }
            }
            match matched {
                Some((id, end)) => {
                    out.push(id);
                    i = end;
                    in_unknown_run = false;
                }
                None => {
                    if !in_unknown_run {
                        out.push(UNK_ID);
                        in_unknown_run = true;
                    }
                    i += 1;
                }
            }
        }
    }

    /// Human-readable rendering of a token sequence.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut parts = Vec::with_capacity(ids.len());
        for &id in ids {
            let word = match id {
                PAD_ID => continue,
                EOS_ID => "</s>".to_string(),
                UNK_ID => "<unk>".to_string(),
                MARKER_TITLE => "<title>".to_string(),
                MARKER_SNIPPET => "<snippet>".to_string(),
                MARKER_REWRITE => "<rewrite>".to_string(),
                MARKER_INTENT => "<intent>".to_string(),
                _ => self
                    .id_to_word
                    .get((id - FIRST_WORD_ID) as usize)
                    .cloned()
                    .unwrap_or_else(|| format!("<{id}>")),
            };
            parts.push(word);
        }
        parts.join(" ")
    }
}
