use crate::error::{Error, Result};
use crate::model::{ContextBundle, ModelConfig, SegmentKind, TokenSegment};

use super::cache::CacheEntry;
use super::tokenizer::Tokenizer;

/// Per-kind context counts (a, b, c, e): titles, snippets, rewrites,
/// intent sentences. The standard serving composition is 4+4+4+1 = 13.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundleLimits {
    pub titles: usize,
    pub snippets: usize,
    pub rewrites: usize,
    pub intents: usize,
}

pub const CONTEXT_SUBSETS: [&str; 8] = [
    "none", "title", "snippet", "rewrites", "intent", "web", "qprofile", "all",
];

impl BundleLimits {
    pub const fn standard() -> Self {
        BundleLimits { titles: 4, snippets: 4, rewrites: 4, intents: 1 }
    }

    pub const fn none() -> Self {
        BundleLimits { titles: 0, snippets: 0, rewrites: 0, intents: 0 }
    }

    /// Maximum number of context segments this composition allows.
    pub fn n_max(&self) -> usize {
        self.titles + self.snippets + self.rewrites + self.intents
    }

    /// Named context subset used by evaluation and the CLI.
    pub fn subset(name: &str) -> Result<Self> {
        let l = match name {
            "none" => Self::none(),
            "title" => BundleLimits { titles: 4, snippets: 0, rewrites: 0, intents: 0 },
            "snippet" => BundleLimits { titles: 0, snippets: 4, rewrites: 0, intents: 0 },
            "rewrites" => BundleLimits { titles: 0, snippets: 0, rewrites: 4, intents: 0 },
            "intent" => BundleLimits { titles: 0, snippets: 0, rewrites: 0, intents: 1 },
            "web" => BundleLimits { titles: 4, snippets: 4, rewrites: 0, intents: 0 },
            "qprofile" => BundleLimits { titles: 0, snippets: 0, rewrites: 4, intents: 1 },
            "all" => Self::standard(),
            _ => {
                return Err(Error::Config(format!(
                    "unknown context subset {name:?}; valid: {}",
                    CONTEXT_SUBSETS.join(", ")
                )))
            }
        };
        Ok(l)
    }

    /// Composition with a given total context count (the count-ablation
    /// axis: k of each type plus one intent, so 4 = 1+1+1+1 up to
    /// 31 = 10+10+10+1).
    pub fn with_total(n: usize) -> Result<Self> {
        let l = match n {
            0 => Self::none(),
            4 => BundleLimits { titles: 1, snippets: 1, rewrites: 1, intents: 1 },
            7 => BundleLimits { titles: 2, snippets: 2, rewrites: 2, intents: 1 },
            13 => Self::standard(),
            31 => BundleLimits { titles: 10, snippets: 10, rewrites: 10, intents: 1 },
            _ => {
                return Err(Error::Config(format!(
                    "unsupported context count {n}; valid: 0, 4, 7, 13, 31"
                )))
            }
        };
        Ok(l)
    }
}

impl Default for BundleLimits {
    fn default() -> Self {
        Self::standard()
    }
}

/// Tokenize one context string into a marker-prefixed, truncated, padded
/// segment of the given kind.
fn context_segment(
    text: &str,
    kind: SegmentKind,
    rank: usize,
    tok: &Tokenizer,
    config: &ModelConfig,
) -> Result<TokenSegment> {
    let cap = config.max_len.for_kind(kind);
    let marker = kind.marker().expect("context kinds carry markers");
    let mut ids = vec![marker];
    let content = tok.encode(text);
    ids.extend(content.into_iter().take(cap - 1));
    Ok(TokenSegment::new(kind, ids, rank, config)?.padded_to(cap))
}

/// Build the model input for one query: the tokenized query plus up to
/// (a, b, c, e) context segments from the cache entry, in rank order
/// (titles, snippets, rewrites, intent). A cache miss (`None`) yields the
/// context-free bundle n = 0.
pub fn assemble_bundle(
    entry: Option<&CacheEntry>,
    query: &str,
    tok: &Tokenizer,
    limits: &BundleLimits,
    config: &ModelConfig,
) -> Result<ContextBundle> {
    let q_ids: Vec<u32> = tok
        .encode(query)
        .into_iter()
        .take(config.max_len.query)
        .collect();
    let query_seg = TokenSegment::new(SegmentKind::Query, q_ids, 0, config)?
        .padded_to(config.max_len.query);

    let mut contexts = Vec::new();
    if let Some(entry) = entry {
        for (rank, r) in entry.web_results.iter().take(limits.titles).enumerate() {
            contexts.push(context_segment(&r.title, SegmentKind::WebTitle, rank, tok, config)?);
        }
        for (rank, r) in entry.web_results.iter().take(limits.snippets).enumerate() {
            contexts.push(context_segment(
                &r.snippet,
                SegmentKind::WebSnippet,
                rank,
                tok,
                config,
            )?);
        }
        if let Some(profile) = &entry.query_profile {
            for (rank, rw) in profile.rewrites.iter().take(limits.rewrites).enumerate() {
                contexts.push(context_segment(rw, SegmentKind::QpRewrite, rank, tok, config)?);
            }
            if limits.intents > 0 {
                contexts.push(context_segment(
                    &profile.intent,
                    SegmentKind::QpIntent,
                    0,
                    tok,
                    config,
                )?);
            }
        }
    }
    ContextBundle::new(query_seg, contexts)
}
