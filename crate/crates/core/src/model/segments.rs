use crate::error::{Error, Result};
use crate::model::config::{ModelConfig, MAX_CONTEXTS};
use crate::numerics::Tensor;

/// Reserved token ids shared by the tokenizer and the model.
pub const PAD_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const UNK_ID: u32 = 2;
/// Kind-specific marker tokens prefixed to context segments.
pub const MARKER_TITLE: u32 = 3;
pub const MARKER_SNIPPET: u32 = 4;
pub const MARKER_REWRITE: u32 = 5;
pub const MARKER_INTENT: u32 = 6;
/// First id available to the learned vocabulary.
pub const FIRST_WORD_ID: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentKind {
    Query,
    WebTitle,
    WebSnippet,
    QpRewrite,
    QpIntent,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 5] = [
        SegmentKind::Query,
        SegmentKind::WebTitle,
        SegmentKind::WebSnippet,
        SegmentKind::QpRewrite,
        SegmentKind::QpIntent,
    ];

    /// Row in the kind-embedding table.
    pub fn index(self) -> usize {
        match self {
            SegmentKind::Query => 0,
            SegmentKind::WebTitle => 1,
            SegmentKind::WebSnippet => 2,
            SegmentKind::QpRewrite => 3,
            SegmentKind::QpIntent => 4,
        }
    }

    /// Marker token prefixed to segments of this kind (contexts only).
    pub fn marker(self) -> Option<u32> {
        match self {
            SegmentKind::Query => None,
            SegmentKind::WebTitle => Some(MARKER_TITLE),
            SegmentKind::WebSnippet => Some(MARKER_SNIPPET),
            SegmentKind::QpRewrite => Some(MARKER_REWRITE),
            SegmentKind::QpIntent => Some(MARKER_INTENT),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SegmentKind::Query => "query",
            SegmentKind::WebTitle => "web_title",
            SegmentKind::WebSnippet => "web_snippet",
            SegmentKind::QpRewrite => "qp_rewrite",
            SegmentKind::QpIntent => "qp_intent",
        }
    }
}

/// One tokenized input segment: the query itself or a single context
/// signal. `source_rank` is the context's rank within its kind (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSegment {
    pub kind: SegmentKind,
    pub ids: Vec<u32>,
    pub source_rank: usize,
}

impl TokenSegment {
    /// Validated constructor: length within the per-kind cap, ids in vocab.
    pub fn new(
        kind: SegmentKind,
        ids: Vec<u32>,
        source_rank: usize,
        config: &ModelConfig,
    ) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Contract(format!("empty {} segment", kind.name())));
        }
        let cap = config.max_len.for_kind(kind);
        if ids.len() > cap {
            return Err(Error::Contract(format!(
                "{} segment length {} exceeds max {cap}",
                kind.name(),
                ids.len()
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= config.vocab_size) {
            return Err(Error::Vocab {
                id: bad,
                vocab: config.vocab_size,
            });
        }
        Ok(TokenSegment {
            kind,
            ids,
            source_rank,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Per-position validity: false at PAD positions.
    pub fn valid_mask(&self) -> Vec<bool> {
        self.ids.iter().map(|&id| id != PAD_ID).collect()
    }

    /// Right-pad with PAD up to `len` (no-op if already that long).
    pub fn padded_to(&self, len: usize) -> TokenSegment {
        let mut ids = self.ids.clone();
        while ids.len() < len {
            ids.push(PAD_ID);
        }
        TokenSegment {
            kind: self.kind,
            ids,
            source_rank: self.source_rank,
        }
    }
}

/// Query plus its ordered context segments (titles, snippets, rewrites,
/// intent -- each in rank order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextBundle {
    pub query: TokenSegment,
    pub contexts: Vec<TokenSegment>,
}

impl ContextBundle {
    pub fn new(query: TokenSegment, contexts: Vec<TokenSegment>) -> Result<Self> {
        if query.kind != SegmentKind::Query {
            return Err(Error::Contract(format!(
                "bundle query segment has kind {}",
                query.kind.name()
            )));
        }
        if contexts.len() > MAX_CONTEXTS {
            return Err(Error::Contract(format!(
                "{} contexts exceed bundle cap {MAX_CONTEXTS}",
                contexts.len()
            )));
        }
        if let Some(c) = contexts.iter().find(|c| c.kind == SegmentKind::Query) {
            return Err(Error::Contract(format!(
                "context segment with query kind (rank {})",
                c.source_rank
            )));
        }
        Ok(ContextBundle { query, contexts })
    }

    /// Number of context segments n.
    pub fn n(&self) -> usize {
        self.contexts.len()
    }
}

/// Context-free bundle that embeds a keyword through the query path: the
/// keyword plays the query role (padded to the query slot count) with zero
/// contexts. Over-long keywords are truncated to the slot count.
pub fn keyword_bundle(ids: &[u32], config: &ModelConfig) -> Result<ContextBundle> {
    let take = ids.len().min(config.max_len.query);
    let seg = TokenSegment::new(SegmentKind::Query, ids[..take].to_vec(), 0, config)?
        .padded_to(config.max_len.query);
    ContextBundle::new(seg, Vec::new())
}

/// Encoder outputs for one bundle: per-segment hidden states (query first)
/// and their row-wise concatenation.
#[derive(Debug, Clone)]
pub struct EncodedStates {
    pub per_segment: Vec<Tensor>,
    pub fused: Tensor,
}

impl EncodedStates {
    pub fn fused_rows(&self) -> usize {
        self.fused.rows()
    }
}
