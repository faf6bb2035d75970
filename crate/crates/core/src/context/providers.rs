use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::Result;
use crate::rng::Rng;

use super::cache::{entry_from_line, QueryProfile, WebResult, MAX_WEB_RESULTS};

/// A synthetic web document attached to one intent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimDocument {
    pub title: String,
    pub snippet: String,
    pub country: String,
}

/// Profile material for one intent: surface rewrites that carry the
/// disambiguating tokens, plus an intent sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimProfile {
    pub rewrites: Vec<String>,
    pub intent: String,
}

/// The slice of a synthetic world the simulated providers read: canonical
/// query -> true intent, and per-intent documents/profiles.
#[derive(Debug, Clone, Default)]
pub struct WorldSource {
    pub query_intent: BTreeMap<String, u32>,
    pub intent_docs: BTreeMap<u32, Vec<SimDocument>>,
    pub intent_profile: BTreeMap<u32, SimProfile>,
}

/// What one provider contributes toward a cache entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProviderFragment {
    pub web_results: Vec<WebResult>,
    pub query_profile: Option<QueryProfile>,
    /// Simulated pipeline delay for this generation, in milliseconds.
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    WebSim,
    ProfileSim,
    FileReplay,
}

/// Synthetic context provider. Output is a pure function of
/// (canonical_query, seed); a query the provider does not know yields an
/// empty fragment, which is a legitimate no-context case.
#[derive(Debug, Clone)]
pub enum ContextProvider {
    WebSim { source: Arc<WorldSource>, seed: u64 },
    ProfileSim { source: Arc<WorldSource>, seed: u64 },
    FileReplay { entries: BTreeMap<String, ProviderFragment> },
}

impl ContextProvider {
    pub fn kind(&self) -> ProviderKind {
        match self {
            ContextProvider::WebSim { .. } => ProviderKind::WebSim,
            ContextProvider::ProfileSim { .. } => ProviderKind::ProfileSim,
            ContextProvider::FileReplay { .. } => ProviderKind::FileReplay,
        }
    }

    /// Load a replay provider from a cache-format fixture file.
    pub fn file_replay(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let display = path.display().to_string();
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let entry = entry_from_line(line, &display, i + 1)?;
            entries.insert(
                entry.canonical_query.clone(),
                ProviderFragment {
                    web_results: entry.web_results,
                    query_profile: entry.query_profile,
                    latency_ms: 0,
                },
            );
        }
        Ok(ContextProvider::FileReplay { entries })
    }

    pub fn generate(&self, canonical_query: &str) -> Result<ProviderFragment> {
        match self {
            ContextProvider::WebSim { source, seed } => {
                let mut rng = Rng::new(*seed).derive("web-sim").derive(canonical_query);
                let latency_ms = 40 + rng.next_below(200) as u64;
                let Some(intent) = source.query_intent.get(canonical_query) else {
                    return Ok(ProviderFragment { latency_ms, ..Default::default() });
                };
                let docs = source.intent_docs.get(intent).cloned().unwrap_or_default();
                let web_results = docs
                    .into_iter()
                    .take(MAX_WEB_RESULTS)
                    .map(|d| WebResult {
                        title: d.title,
                        snippet: d.snippet,
                        country: d.country,
                        timestamp: 1_600_000_000 + rng.next_below(100_000_000) as u64,
                    })
                    .collect();
                Ok(ProviderFragment {
                    web_results,
                    query_profile: None,
                    latency_ms,
                })
            }
            ContextProvider::ProfileSim { source, seed } => {
                let mut rng = Rng::new(*seed).derive("profile-sim").derive(canonical_query);
                let latency_ms = 300 + rng.next_below(1500) as u64;
                let Some(intent) = source.query_intent.get(canonical_query) else {
                    return Ok(ProviderFragment { latency_ms, ..Default::default() });
                };
                let profile = source.intent_profile.get(intent).map(|p| QueryProfile {
                    rewrites: p.rewrites.clone(),
                    intent: p.intent.clone(),
                });
                Ok(ProviderFragment {
                    web_results: Vec::new(),
                    query_profile: profile,
                    latency_ms,
                })
            }
            ContextProvider::FileReplay { entries } => {
                Ok(entries.get(canonical_query).cloned().unwrap_or_default())
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// A replay provider that knows exactly one query.
    pub fn fixed_provider(canonical: &str) -> ContextProvider {
        let mut entries = BTreeMap::new();
        entries.insert(
            canonical.to_string(),
            ProviderFragment {
                web_results: vec![WebResult {
                    title: format!("{canonical} guide"),
                    snippet: format!("everything about {canonical}"),
                    country: "US".into(),
                    timestamp: 11,
                }],
                query_profile: Some(QueryProfile {
                    rewrites: vec![format!("buy {canonical}")],
                    intent: format!("shopping for {canonical}"),
                }),
                latency_ms: 1,
            },
        );
        ContextProvider::FileReplay { entries }
    }

    /// A tiny two-intent world source for provider tests.
    pub fn toy_world_source() -> Arc<WorldSource> {
        let mut source = WorldSource::default();
        source.query_intent.insert("apple".into(), 0);
        source.query_intent.insert("apple phone".into(), 0);
        source.query_intent.insert("apple orchard".into(), 1);
        source.intent_docs.insert(
            0,
            (0..12)
                .map(|i| SimDocument {
                    title: format!("electronics store {i}"),
                    snippet: format!("smartphone deals {i}"),
                    country: "US".into(),
                })
                .collect(),
        );
        source.intent_docs.insert(
            1,
            vec![SimDocument {
                title: "orchard farming".into(),
                snippet: "fruit trees".into(),
                country: "US".into(),
            }],
        );
        source.intent_profile.insert(
            0,
            SimProfile {
                rewrites: vec!["apple smartphone".into(), "apple electronics".into()],
                intent: "user wants electronics".into(),
            },
        );
        source.intent_profile.insert(
            1,
            SimProfile {
                rewrites: vec!["apple fruit orchard".into()],
                intent: "user wants farming".into(),
            },
        );
        Arc::new(source)
    }
}
