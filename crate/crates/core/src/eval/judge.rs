use crate::error::{Error, Result};
use crate::retrieval::RetrievalResult;
use crate::training::MatchType;

use super::world::SyntheticWorld;

/// Nested relevance judgment: exact implies phrase implies smart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JudgeLabel {
    pub exact: bool,
    pub phrase: bool,
    pub smart: bool,
}

impl JudgeLabel {
    pub fn get(&self, match_type: MatchType) -> bool {
        match match_type {
            MatchType::Exact => self.exact,
            MatchType::Phrase => self.phrase,
            MatchType::Smart => self.smart,
        }
    }

    pub fn nesting_holds(&self) -> bool {
        (!self.exact || self.phrase) && (!self.phrase || self.smart)
    }
}

/// Rule oracle over the synthetic world: for a query with true intent I and
/// a keyword owned by intent J with tag t,
///   exact  iff J = I and t = exact,
///   phrase iff J = I and t is exact or phrase,
///   smart  iff category(J) = category(I).
pub fn judge(world: &SyntheticWorld, intent_id: u32, keyword_id: u32) -> Result<JudgeLabel> {
    let intent = world
        .intents
        .get(intent_id as usize)
        .ok_or_else(|| Error::Contract(format!("unknown intent id {intent_id}")))?;
    let kw = world
        .keywords
        .get(keyword_id as usize)
        .ok_or_else(|| Error::Contract(format!("unknown keyword id {keyword_id}")))?;
    let owner = world
        .intents
        .get(kw.intent as usize)
        .ok_or_else(|| Error::Contract(format!("keyword {keyword_id} has bad intent")))?;
    let same_intent = owner.id == intent.id;
    let exact = same_intent && kw.match_type == MatchType::Exact;
    let phrase = same_intent && matches!(kw.match_type, MatchType::Exact | MatchType::Phrase);
    let smart = owner.category == intent.category;
    Ok(JudgeLabel { exact, phrase, smart })
}

/// Precision@K with denominator fixed at k: missing result slots count as
/// failures. `labels[i]` is the judgment for `results[i]`.
pub fn precision_at_k(
    results: &[RetrievalResult],
    labels: &[JudgeLabel],
    k: usize,
    match_type: MatchType,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::Contract("precision_at_k requires k >= 1".into()));
    }
    if results.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} results but {} labels",
            results.len(),
            labels.len()
        )));
    }
    let top = k.min(results.len());
    let hits = labels[..top].iter().filter(|l| l.get(match_type)).count();
    Ok(hits as f64 / k as f64)
}
