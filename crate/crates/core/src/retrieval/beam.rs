use crate::error::{Error, Result};
use crate::model::EOS_ID;

use super::trie::KeywordTrie;

/// Which retrieval path produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalPath {
    /// Generative (beam search over the decoder's token distributions).
    Nlg,
    /// Dense (cosine similarity in embedding space).
    Dr,
}

impl RetrievalPath {
    pub fn name(self) -> &'static str {
        match self {
            RetrievalPath::Nlg => "nlg",
            RetrievalPath::Dr => "dr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalResult {
    pub keyword_id: u32,
    pub score: f32,
    pub path: RetrievalPath,
}

/// Row-wise log-softmax over a flat `rows x vocab` logits buffer.
pub fn log_softmax_rows(logits: &[f32], rows: usize, vocab: usize) -> Result<Vec<f32>> {
    if logits.len() != rows * vocab {
        return Err(Error::Dimension {
            op: "log_softmax_rows",
            lhs: vec![logits.len()],
            rhs: vec![rows, vocab],
        });
    }
    let mut out = vec![0.0f32; logits.len()];
    for r in 0..rows {
        let row = &logits[r * vocab..(r + 1) * vocab];
        let mut max = f32::NEG_INFINITY;
        for &x in row {
            if !x.is_finite() {
                return Err(Error::Numeric(format!("non-finite logit {x} in row {r}")));
            }
            if x > max {
                max = x;
            }
        }
        let mut denom = 0.0f64;
        for &x in row {
            denom += ((x - max) as f64).exp();
        }
        let log_denom = denom.ln() as f32;
        for (c, &x) in row.iter().enumerate() {
            out[r * vocab + c] = x - max - log_denom;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Beam {
    node: usize,
    score: f32,
}

/// Trie-constrained beam search over per-position token distributions.
///
/// `logits` holds the decoder's output rows (one per query position, `l0 x vocab`,
/// row-major). A keyword of m tokens scores the sum of its token log-probabilities
/// at positions 1..=m plus, when position m+1 still exists, the log-probability of
/// EOS there; keywords longer than `l0` cannot complete. Results come back sorted
/// by score descending, ties broken by keyword id ascending. An empty result is
/// valid: it means no corpus keyword fit within `l0` positions or survived pruning.
pub fn nar_beam_search(
    logits: &[f32],
    l0: usize,
    vocab: usize,
    trie: &KeywordTrie,
    beam: usize,
    top_k: usize,
) -> Result<Vec<RetrievalResult>> {
    if top_k < 1 || beam < top_k {
        return Err(Error::Contract(format!(
            "beam search requires beam >= top_k >= 1, got beam={beam} top_k={top_k}"
        )));
    }
    if (EOS_ID as usize) >= vocab {
        return Err(Error::Vocab { id: EOS_ID, vocab });
    }
    let lp = log_softmax_rows(logits, l0, vocab)?;
    let row = |t: usize, tok: u32| lp[t * vocab + tok as usize];

    let mut live = vec![Beam { node: trie.root(), score: 0.0 }];
    let mut completed: Vec<(u32, f32)> = Vec::new();

    for t in 0..l0 {
        let mut next: Vec<Beam> = Vec::new();
        for b in &live {
            for (tok, child) in trie.children(b.node) {
                if tok as usize >= vocab {
                    continue;
                }
                let score = b.score + row(t, tok);
                if let Some(id) = trie.terminal(child) {
                    let eos = if t + 1 < l0 { row(t + 1, EOS_ID) } else { 0.0 };
                    completed.push((id, score + eos));
                }
                next.push(Beam { node: child, score });
            }
        }
        // Prune to the beam width; node index breaks exact-score ties so the
        // surviving set is deterministic.
        next.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
        next.truncate(beam);
        live = next;
        if live.is_empty() {
            break;
        }
    }

    completed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    completed.truncate(top_k);
    Ok(completed
        .into_iter()
        .map(|(keyword_id, score)| RetrievalResult {
            keyword_id,
            score,
            path: RetrievalPath::Nlg,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SegmentKind, TokenSegment};
    use crate::rng::Rng;

    fn seg(ids: Vec<u32>) -> TokenSegment {
        TokenSegment { kind: SegmentKind::Query, ids, source_rank: 0 }
    }

    fn random_logits(rng: &mut Rng, rows: usize, vocab: usize) -> Vec<f32> {
        (0..rows * vocab).map(|_| rng.next_gauss() as f32 * 2.0).collect()
    }

    /// Score every corpus keyword directly from the log-softmax table.
    fn exhaustive(
        logits: &[f32],
        l0: usize,
        vocab: usize,
        corpus: &[Vec<u32>],
        top_k: usize,
    ) -> Vec<(u32, f32)> {
        let lp = log_softmax_rows(logits, l0, vocab).unwrap();
        let mut scored: Vec<(u32, f32)> = Vec::new();
        for (id, kw) in corpus.iter().enumerate() {
            if kw.len() > l0 {
                continue;
            }
            let mut s = 0.0f32;
            for (t, &tok) in kw.iter().enumerate() {
                s += lp[t * vocab + tok as usize];
            }
            if kw.len() < l0 {
                s += lp[kw.len() * vocab + EOS_ID as usize];
            }
            scored.push((id as u32, s));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_k);
        scored
    }

    #[test]
    fn single_keyword_hand_summed() {
        // [DERIVED] corpus {"t5 t9"}: score = lp[0][5] + lp[1][9] + lp[2][EOS].
        let mut rng = Rng::new(7);
        let (l0, vocab) = (4usize, 16usize);
        let logits = random_logits(&mut rng, l0, vocab);
        let trie = KeywordTrie::build(&[seg(vec![5, 9])]).unwrap();
        let out = nar_beam_search(&logits, l0, vocab, &trie, 4, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].keyword_id, 0);
        assert_eq!(out[0].path, RetrievalPath::Nlg);
        let lp = log_softmax_rows(&logits, l0, vocab).unwrap();
        let expect = lp[5] + lp[vocab + 9] + lp[2 * vocab + EOS_ID as usize];
        assert!((out[0].score - expect).abs() <= 1e-6);
    }

    #[test]
    fn exact_length_keyword_needs_no_eos() {
        let mut rng = Rng::new(8);
        let (l0, vocab) = (3usize, 16usize);
        let logits = random_logits(&mut rng, l0, vocab);
        let trie = KeywordTrie::build(&[seg(vec![5, 9, 7])]).unwrap();
        let out = nar_beam_search(&logits, l0, vocab, &trie, 4, 1).unwrap();
        let lp = log_softmax_rows(&logits, l0, vocab).unwrap();
        let expect = lp[5] + lp[vocab + 9] + lp[2 * vocab + 7];
        assert!((out[0].score - expect).abs() <= 1e-6);
    }

    #[test]
    fn too_long_keyword_never_returned() {
        let mut rng = Rng::new(9);
        let (l0, vocab) = (2usize, 16usize);
        let logits = random_logits(&mut rng, l0, vocab);
        let trie = KeywordTrie::build(&[seg(vec![5, 9, 7]), seg(vec![6])]).unwrap();
        let out = nar_beam_search(&logits, l0, vocab, &trie, 8, 8).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].keyword_id, 1);
    }

    #[test]
    fn uniform_logits_prefer_shorter_then_lower_id() {
        // [DERIVED] with all-equal logits every token has log-prob -ln(V); a
        // keyword of m tokens scores -(m+1)ln(V) when EOS applies, so shorter
        // keywords rank first and equal lengths fall back to id order.
        let (l0, vocab) = (4usize, 32usize);
        let logits = vec![0.25f32; l0 * vocab];
        let corpus = vec![
            seg(vec![10, 11, 12]), // id 0, len 3
            seg(vec![9]),          // id 1, len 1
            seg(vec![13, 14]),     // id 2, len 2
            seg(vec![8]),          // id 3, len 1
        ];
        let trie = KeywordTrie::build(&corpus).unwrap();
        let out = nar_beam_search(&logits, l0, vocab, &trie, 8, 4).unwrap();
        let ids: Vec<u32> = out.iter().map(|r| r.keyword_id).collect();
        assert_eq!(ids, vec![1, 3, 2, 0]);
        let ln_v = (vocab as f32).ln();
        assert!((out[0].score + 2.0 * ln_v).abs() <= 1e-5);
        assert!((out[3].score + 4.0 * ln_v).abs() <= 1e-5);
    }

    #[test]
    fn full_width_beam_matches_exhaustive() {
        let mut rng = Rng::new(31);
        let (l0, vocab) = (5usize, 64usize);
        let mut corpus: Vec<Vec<u32>> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        while corpus.len() < 50 {
            let len = 1 + rng.next_below(5);
            let kw: Vec<u32> = (0..len).map(|_| 5 + rng.next_below(40) as u32).collect();
            if seen.insert(kw.clone()) {
                corpus.push(kw);
            }
        }
        let segs: Vec<TokenSegment> = corpus.iter().cloned().map(seg).collect();
        let trie = KeywordTrie::build(&segs).unwrap();
        for trial in 0..20 {
            let logits = random_logits(&mut rng, l0, vocab);
            let got = nar_beam_search(&logits, l0, vocab, &trie, 64, 50).unwrap();
            let want = exhaustive(&logits, l0, vocab, &corpus, 50);
            assert_eq!(got.len(), want.len(), "trial {trial}");
            for (g, (id, s)) in got.iter().zip(&want) {
                assert_eq!(g.keyword_id, *id, "trial {trial}");
                assert!((g.score - s).abs() <= 1e-5, "trial {trial}");
            }
        }
    }

    #[test]
    fn every_output_is_corpus_member() {
        let mut rng = Rng::new(32);
        let (l0, vocab) = (4usize, 48usize);
        let mut corpus: Vec<Vec<u32>> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        while corpus.len() < 30 {
            let len = 1 + rng.next_below(4);
            let kw: Vec<u32> = (0..len).map(|_| 5 + rng.next_below(30) as u32).collect();
            if seen.insert(kw.clone()) {
                corpus.push(kw);
            }
        }
        let segs: Vec<TokenSegment> = corpus.iter().cloned().map(seg).collect();
        let trie = KeywordTrie::build(&segs).unwrap();
        for _ in 0..50 {
            let logits = random_logits(&mut rng, l0, vocab);
            let out = nar_beam_search(&logits, l0, vocab, &trie, 4, 4).unwrap();
            for r in &out {
                assert!(trie.membership(&corpus[r.keyword_id as usize]));
            }
        }
    }

    #[test]
    fn bad_widths_rejected() {
        let trie = KeywordTrie::build(&[seg(vec![5])]).unwrap();
        let logits = vec![0.0f32; 2 * 8];
        assert!(matches!(
            nar_beam_search(&logits, 2, 8, &trie, 2, 3),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            nar_beam_search(&logits, 2, 8, &trie, 2, 0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn narrow_beam_can_return_empty() {
        // One high-probability first token leads nowhere; the only real keyword
        // starts with a low-probability token and gets pruned at width 1.
        let (l0, vocab) = (2usize, 8usize);
        let mut logits = vec![0.0f32; l0 * vocab];
        logits[5] = 10.0; // position 0 strongly prefers token 5
        let corpus = vec![seg(vec![5, 6, 7]), seg(vec![3, 4])];
        let trie = KeywordTrie::build(&corpus).unwrap();
        let out = nar_beam_search(&logits, l0, vocab, &trie, 1, 1).unwrap();
        assert!(out.is_empty());
    }
}
