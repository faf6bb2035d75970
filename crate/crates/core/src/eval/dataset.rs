use std::collections::BTreeMap;
use std::sync::Arc;

use crate::context::{
    assemble_bundle, BundleLimits, CacheEntry, ContextCache, ContextProvider, QueryProfile,
    Tokenizer, WebResult, MAX_WEB_RESULTS,
};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainingPair;

use super::world::SyntheticWorld;

/// The two simulated providers (web search + query profile) over a world.
pub fn world_providers(world: &SyntheticWorld, seed: u64) -> Vec<ContextProvider> {
    let source = Arc::new(world.context_source());
    vec![
        ContextProvider::WebSim { source: source.clone(), seed },
        ContextProvider::ProfileSim { source, seed },
    ]
}

/// Run the offline pipeline for every world surface: miss-enqueue each one,
/// then drain, leaving a fully warmed cache (the steady state the paper's
/// serving stack converges to).
pub fn warm_cache(world: &SyntheticWorld, seed: u64, now: u64) -> Result<ContextCache> {
    let providers = world_providers(world, seed);
    let mut cache = ContextCache::new();
    for surf in &world.surfaces {
        cache.lookup_canonical(&surf.text);
    }
    cache.drain(&providers, now)?;
    Ok(cache)
}

/// A cache-entry view of one intent's context material. Training pairs use
/// these directly: each pair carries the context snapshot of ITS OWN intent
/// (as a production log would), so an ambiguous surface appears under both
/// readings distinguished only by context. The serving cache, by contrast,
/// always holds the dominant reading.
pub fn intent_entry(world: &SyntheticWorld, intent_id: u32) -> Result<CacheEntry> {
    let docs = world
        .docs
        .get(&intent_id)
        .ok_or_else(|| Error::Contract(format!("unknown intent id {intent_id}")))?;
    let web_results: Vec<WebResult> = docs
        .iter()
        .take(MAX_WEB_RESULTS)
        .map(|d| WebResult {
            title: d.title.clone(),
            snippet: d.snippet.clone(),
            country: d.country.clone(),
            timestamp: 0,
        })
        .collect();
    let query_profile = world.profiles.get(&intent_id).map(|p| QueryProfile {
        rewrites: p.rewrites.clone(),
        intent: p.intent.clone(),
    });
    CacheEntry::new(format!("intent:{intent_id}"), web_results, query_profile, 0, 0)
}

/// Materialize training pairs: per world pair, the assembled context bundle
/// (from the pair's intent) plus the tokenized keyword.
pub fn build_training_pairs(
    world: &SyntheticWorld,
    tok: &Tokenizer,
    limits: &BundleLimits,
    config: &ModelConfig,
) -> Result<Vec<TrainingPair>> {
    let corpus = world.corpus_segments(tok, config)?;
    let mut entries: BTreeMap<u32, CacheEntry> = BTreeMap::new();
    for intent in &world.intents {
        entries.insert(intent.id, intent_entry(world, intent.id)?);
    }
    let mut out = Vec::with_capacity(world.train_pairs.len());
    for pair in &world.train_pairs {
        let bundle =
            assemble_bundle(entries.get(&pair.intent), &pair.surface, tok, limits, config)?;
        let kw = &world.keywords[pair.keyword_id as usize];
        out.push(TrainingPair {
            bundle,
            keyword: corpus[pair.keyword_id as usize].clone(),
            match_type: kw.match_type,
        });
    }
    Ok(out)
}
