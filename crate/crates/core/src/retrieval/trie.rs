use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::TokenSegment;

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<u32, usize>,
    /// Keyword id when a corpus keyword ends here.
    terminal: Option<u32>,
}

/// Prefix tree over corpus keyword token sequences; node 0 is the root.
#[derive(Debug, Clone)]
pub struct KeywordTrie {
    nodes: Vec<TrieNode>,
    len: usize,
}

impl KeywordTrie {
    /// Build from the corpus; keyword id = position in the slice.
    pub fn build(corpus: &[TokenSegment]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Corpus("empty corpus".into()));
        }
        let mut trie = KeywordTrie {
            nodes: vec![TrieNode::default()],
            len: 0,
        };
        for (id, kw) in corpus.iter().enumerate() {
            trie.insert(&kw.ids, id as u32)?;
        }
        Ok(trie)
    }

    fn insert(&mut self, tokens: &[u32], id: u32) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::Corpus(format!("keyword {id} has no tokens")));
        }
        let mut at = 0usize;
        for &tok in tokens {
            let next = match self.nodes[at].children.get(&tok) {
                Some(&n) => n,
                None => {
                    self.nodes.push(TrieNode::default());
                    let n = self.nodes.len() - 1;
                    self.nodes[at].children.insert(tok, n);
                    n
                }
            };
            at = next;
        }
        if let Some(existing) = self.nodes[at].terminal {
            return Err(Error::Corpus(format!(
                "duplicate keyword: ids {existing} and {id} share one token sequence"
            )));
        }
        self.nodes[at].terminal = Some(id);
        self.len += 1;
        Ok(())
    }

    /// Number of keywords stored.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub(crate) fn root(&self) -> usize {
        0
    }

    pub(crate) fn children(&self, node: usize) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.nodes[node].children.iter().map(|(&t, &n)| (t, n))
    }

    pub(crate) fn terminal(&self, node: usize) -> Option<u32> {
        self.nodes[node].terminal
    }

    /// True iff the exact token sequence is a corpus keyword.
    pub fn membership(&self, tokens: &[u32]) -> bool {
        let mut at = 0usize;
        for tok in tokens {
            match self.nodes[at].children.get(tok) {
                Some(&n) => at = n,
                None => return false,
            }
        }
        self.nodes[at].terminal.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SegmentKind;
    use crate::rng::Rng;

    fn seg(ids: Vec<u32>) -> TokenSegment {
        TokenSegment { kind: SegmentKind::Query, ids, source_rank: 0 }
    }

    #[test]
    fn two_keywords_share_prefix() {
        // {"a b", "a c"} as token ids: a=10, b=11, c=12
        let trie = KeywordTrie::build(&[seg(vec![10, 11]), seg(vec![10, 12])]).unwrap();
        let root_children: Vec<_> = trie.children(trie.root()).collect();
        assert_eq!(root_children.len(), 1);
        let (tok, a_node) = root_children[0];
        assert_eq!(tok, 10);
        let leaves: Vec<_> = trie.children(a_node).collect();
        assert_eq!(leaves.len(), 2);
        assert_eq!(trie.terminal(leaves[0].1), Some(0));
        assert_eq!(trie.terminal(leaves[1].1), Some(1));
        assert_eq!(trie.terminal(a_node), None);
    }

    #[test]
    fn membership_matches_set_oracle() {
        let mut rng = Rng::new(99);
        let mut corpus: Vec<Vec<u32>> = Vec::new();
        let mut set = std::collections::BTreeSet::new();
        while corpus.len() < 60 {
            let len = 1 + rng.next_below(4);
            let kw: Vec<u32> = (0..len).map(|_| 5 + rng.next_below(20) as u32).collect();
            if set.insert(kw.clone()) {
                corpus.push(kw);
            }
        }
        let segs: Vec<TokenSegment> = corpus.iter().cloned().map(seg).collect();
        let trie = KeywordTrie::build(&segs).unwrap();
        for kw in &corpus {
            assert!(trie.membership(kw));
        }
        let mut non_members = 0;
        while non_members < 1000 {
            let len = 1 + rng.next_below(5);
            let cand: Vec<u32> = (0..len).map(|_| 5 + rng.next_below(25) as u32).collect();
            if !set.contains(&cand) {
                assert!(!trie.membership(&cand));
                non_members += 1;
            }
        }
    }

    #[test]
    fn empty_keyword_rejected() {
        let err = KeywordTrie::build(&[seg(vec![])]).unwrap_err();
        assert!(matches!(err, Error::Corpus(_)));
    }

    #[test]
    fn duplicate_sequence_rejected() {
        let err = KeywordTrie::build(&[seg(vec![10, 11]), seg(vec![10, 11])]).unwrap_err();
        assert!(matches!(err, Error::Corpus(_)));
    }

    #[test]
    fn prefix_keyword_is_distinct_terminal() {
        let trie = KeywordTrie::build(&[seg(vec![10]), seg(vec![10, 11])]).unwrap();
        assert!(trie.membership(&[10]));
        assert!(trie.membership(&[10, 11]));
        assert!(!trie.membership(&[11]));
    }
}
