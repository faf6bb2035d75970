use crate::error::{Error, Result};
use crate::model::{keyword_bundle, ContextBundle, TokenSegment, UnityModel, EOS_ID};
use crate::numerics::{NodeId, Tape};

/// Relative weight of the contrastive term.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub lambda: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda: 1.0 }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum MatchType {
    Exact,
    Phrase,
    Smart,
}

impl MatchType {
    pub fn name(self) -> &'static str {
        match self {
            MatchType::Exact => "exact",
            MatchType::Phrase => "phrase",
            MatchType::Smart => "smart",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MatchType::Exact),
            "phrase" => Ok(MatchType::Phrase),
            "smart" => Ok(MatchType::Smart),
            other => Err(Error::Config(format!("unknown match type '{other}'"))),
        }
    }
}

/// One training example: query bundle, positive keyword, judged match type.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub bundle: ContextBundle,
    pub keyword: TokenSegment,
    pub match_type: MatchType,
}

/// Decoder-position targets for a keyword: tokens left-aligned, one EOS
/// after the last token when it fits, `None` elsewhere. Keywords longer
/// than the slot count are truncated to exactly fill it (no EOS term).
pub fn nlg_targets(keyword: &[u32], slots: usize) -> Result<Vec<Option<u32>>> {
    if keyword.is_empty() {
        return Err(Error::Contract("nlg_targets: empty keyword".into()));
    }
    let m = keyword.len().min(slots);
    let mut targets: Vec<Option<u32>> = keyword[..m].iter().map(|&t| Some(t)).collect();
    if m < slots {
        targets.push(Some(EOS_ID));
    }
    targets.resize(slots, None);
    if targets.len() > slots {
        return Err(Error::Contract(format!(
            "nlg_targets: {} targets exceed {slots} decoder positions",
            targets.len()
        )));
    }
    Ok(targets)
}

/// L^N for one pair: summed NLL of the aligned keyword targets under the
/// per-position distributions.
pub fn nlg_loss(tape: &mut Tape, logits: NodeId, keyword: &TokenSegment) -> Result<NodeId> {
    let slots = tape.shape(logits)[0];
    let targets = nlg_targets(&keyword.ids, slots)?;
    tape.cross_entropy_gather(logits, &targets)
}

/// L^D: InfoNCE over in-batch negatives. Row i of each side is a positive
/// pair; similarity is cosine.
pub fn contrastive_loss(tape: &mut Tape, query_embs: NodeId, keyword_embs: NodeId) -> Result<NodeId> {
    let b = tape.shape(query_embs)[0];
    if tape.shape(keyword_embs)[0] != b {
        return Err(Error::Dimension {
            op: "contrastive_loss",
            lhs: tape.shape(query_embs).to_vec(),
            rhs: tape.shape(keyword_embs).to_vec(),
        });
    }
    let sims = tape.cosine(query_embs, keyword_embs)?;
    let diag: Vec<Option<u32>> = (0..b as u32).map(Some).collect();
    tape.cross_entropy_gather(sims, &diag)
}

/// Handles out of a combined-loss graph build.
pub struct CombinedOut {
    pub loss: NodeId,
    /// Mean NLG loss per pair (forward value).
    pub nlg_mean: f32,
    /// Mean contrastive loss per pair (forward value).
    pub dr_mean: f32,
    pub query_embs: NodeId,
}

/// Build the full combined-loss graph for a batch on one tape:
/// (1/|B|) (sum_i L^N_i + lambda * L^D).
pub fn combined_loss(
    model: &UnityModel,
    tape: &mut Tape,
    batch: &[TrainingPair],
    weights: &LossWeights,
) -> Result<CombinedOut> {
    if batch.is_empty() {
        return Err(Error::Contract("combined_loss: empty batch".into()));
    }
    let mut nlg_nodes = Vec::with_capacity(batch.len());
    let mut q_nodes = Vec::with_capacity(batch.len());
    let mut k_nodes = Vec::with_capacity(batch.len());
    for pair in batch {
        let out = model.forward(tape, &pair.bundle)?;
        nlg_nodes.push(nlg_loss(tape, out.logits, &pair.keyword)?);
        q_nodes.push(out.embedding);
        let kb = keyword_bundle(&pair.keyword.ids, &model.config)?;
        k_nodes.push(model.embed_query(tape, &kb)?);
    }
    let mut nlg_sum = nlg_nodes[0];
    for &n in &nlg_nodes[1..] {
        nlg_sum = tape.add(nlg_sum, n)?;
    }
    let q = tape.concat_rows(&q_nodes)?;
    let k = tape.concat_rows(&k_nodes)?;
    let dr = contrastive_loss(tape, q, k)?;
    let weighted = tape.scale(dr, weights.lambda);
    let total = tape.add(nlg_sum, weighted)?;
    let inv_b = 1.0 / batch.len() as f32;
    let loss = tape.scale(total, inv_b);
    Ok(CombinedOut {
        loss,
        nlg_mean: tape.value(nlg_sum)[0] * inv_b,
        dr_mean: tape.value(dr)[0] * inv_b,
        query_embs: q,
    })
}
