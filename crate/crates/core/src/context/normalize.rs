use std::collections::BTreeSet;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

use super::tokenizer::Tokenizer;

/// Canonical query normalization: unicode NFKC fold, lowercase, whitespace
/// collapse, then a dictionary-based single-edit spell fold. A word is
/// folded only when exactly one vocabulary word sits at edit distance 1;
/// zero or several candidates leave it unchanged, which keeps the map
/// deterministic and idempotent.
#[derive(Debug, Clone)]
pub struct Normalizer {
    words: BTreeSet<String>,
}

impl Normalizer {
    pub fn new(words: impl IntoIterator<Item = String>) -> Self {
        Normalizer {
            words: words.into_iter().collect(),
        }
    }

    pub fn from_tokenizer(tok: &Tokenizer) -> Self {
        Self::new(tok.words().iter().cloned())
    }

    /// Empty dictionary: normalization without spell folding.
    pub fn plain() -> Self {
        Normalizer {
            words: BTreeSet::new(),
        }
    }

    pub fn normalize(&self, query: &str) -> Result<String> {
        let folded: String = query.nfkc().collect::<String>().to_lowercase();
        let mut out_words = Vec::new();
        for word in folded.split_whitespace() {
            out_words.push(self.fold_word(word));
        }
        if out_words.is_empty() {
            return Err(Error::Contract("empty query after normalization".into()));
        }
        Ok(out_words.join(" "))
    }

    fn fold_word(&self, word: &str) -> String {
        if self.words.contains(word) {
            return word.to_string();
        }
        let mut candidate = None;
        for w in &self.words {
            if within_one_edit(word, w) {
                if candidate.is_some() {
                    return word.to_string(); // ambiguous: leave as-is
                }
                candidate = Some(w.clone());
            }
        }
        candidate.unwrap_or_else(|| word.to_string())
    }
}

/// Levenshtein distance exactly 0 or 1 between two words.
pub fn within_one_edit(a: &str, b: &str) -> bool {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    match long.len() - short.len() {
        0 => {
            let mismatches = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            mismatches <= 1
        }
        1 => {
            // One insertion: walk both, allow a single skip on the long side.
            let mut i = 0;
            let mut j = 0;
            let mut skipped = false;
            while i < short.len() && j < long.len() {
                if short[i] == long[j] {
                    i += 1;
                    j += 1;
                } else if skipped {
                    return false;
                } else {
                    skipped = true;
                    j += 1;
                }
            }
            true
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn dict() -> Normalizer {
        Normalizer::new(
            ["fishing", "reels", "carbon", "rod"]
                .iter()
                .map(|s| s.to_string()),
        )
    }

    #[test]
    fn trims_lowercases_and_collapses_whitespace() {
        assert_eq!(
            dict().normalize("  Fishing   REELS ").unwrap(),
            "fishing reels"
        );
    }

    #[test]
    fn single_edit_spell_fold() {
        // [DERIVED] "fishng" -> "fishing": one deletion away, and no other
        // dictionary word is within one edit of it.
        assert_eq!(dict().normalize("fishng reels").unwrap(), "fishing reels");
        // Substitution and insertion variants fold too.
        assert_eq!(dict().normalize("fishing reals").unwrap(), "fishing reels");
        assert_eq!(dict().normalize("carbons rod").unwrap(), "carbon rod");
    }

    #[test]
    fn ambiguous_or_distant_words_left_alone() {
        let n = Normalizer::new(["cat", "car", "dog"].iter().map(|s| s.to_string()));
        // "cab" is one edit from both "cat" and "car": ambiguous, unchanged.
        assert_eq!(n.normalize("cab").unwrap(), "cab");
        // Two edits away from everything: unchanged.
        assert_eq!(n.normalize("zebra").unwrap(), "zebra");
    }

    #[test]
    fn nfkc_folds_compatibility_forms() {
        // U+FB01 is the "fi" ligature; NFKC expands it.
        assert_eq!(dict().normalize("\u{FB01}shing").unwrap(), "fishing");
        // Fullwidth letters fold to ASCII.
        assert_eq!(dict().normalize("\u{FF52}od").unwrap(), "rod");
    }

    #[test]
    fn empty_input_is_a_contract_error() {
        assert!(matches!(dict().normalize("   "), Err(Error::Contract(_))));
        assert!(matches!(dict().normalize(""), Err(Error::Contract(_))));
    }

    #[test]
    fn idempotent_over_random_strings() {
        let n = dict();
        let mut rng = Rng::new(77);
        let alphabet: Vec<char> = "abcdefgh ABCDEFGH \u{FB01}\u{FF52}\u{00E9}  ".chars().collect();
        let mut checked = 0;
        for _ in 0..10_000 {
            let len = 1 + rng.next_below(12);
            let s: String = (0..len)
                .map(|_| alphabet[rng.next_below(alphabet.len())])
                .collect();
            match n.normalize(&s) {
                Ok(once) => {
                    let twice = n.normalize(&once).unwrap();
                    assert_eq!(once, twice, "input {s:?}");
                    checked += 1;
                }
                Err(Error::Contract(_)) => {} // all-whitespace draw
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(checked > 5_000);
    }

    #[test]
    fn edit_distance_helper() {
        assert!(within_one_edit("abc", "abc"));
        assert!(within_one_edit("abc", "abd"));
        assert!(within_one_edit("abc", "ab"));
        assert!(within_one_edit("abc", "abcd"));
        assert!(!within_one_edit("abc", "adx"));
        assert!(!within_one_edit("abc", "abcde"));
        assert!(!within_one_edit("", "ab"));
        assert!(within_one_edit("", "a"));
    }
}
