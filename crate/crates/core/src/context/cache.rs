use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

use super::normalize::Normalizer;
use super::providers::ContextProvider;

pub const MAX_WEB_RESULTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebResult {
    pub title: String,
    pub snippet: String,
    pub country: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryProfile {
    pub rewrites: Vec<String>,
    pub intent: String,
}

/// One cached context record, keyed by canonical query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub canonical_query: String,
    pub web_results: Vec<WebResult>,
    pub query_profile: Option<QueryProfile>,
    pub created_at: u64,
    pub refreshed_at: u64,
}

impl CacheEntry {
    pub fn new(
        canonical_query: String,
        web_results: Vec<WebResult>,
        query_profile: Option<QueryProfile>,
        created_at: u64,
        refreshed_at: u64,
    ) -> Result<Self> {
        if web_results.len() > MAX_WEB_RESULTS {
            return Err(Error::Contract(format!(
                "{} web results exceed the cap of {MAX_WEB_RESULTS}",
                web_results.len()
            )));
        }
        if let Some(p) = &query_profile {
            if p.rewrites.is_empty() {
                return Err(Error::Contract(
                    "query profile present but rewrites empty".into(),
                ));
            }
        }
        Ok(CacheEntry {
            canonical_query,
            web_results,
            query_profile,
            created_at,
            refreshed_at,
        })
    }
}

/// Counters exposed to the CLI. `pending` is the current queue depth; the
/// others accumulate over the cache's lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub pending: usize,
    pub refreshes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefreshStats {
    pub enqueued: usize,
}

#[derive(Debug, Clone)]
struct PipelineTask {
    canonical_query: String,
    refresh: bool,
}

/// Query-context cache with an in-process asynchronous miss pipeline: a
/// miss enqueues a generation task at most once per canonical query; a
/// separate `drain` step runs the providers and publishes entries.
#[derive(Debug, Default)]
pub struct ContextCache {
    entries: BTreeMap<String, CacheEntry>,
    in_flight: BTreeSet<String>,
    queue: VecDeque<PipelineTask>,
    hits: u64,
    misses: u64,
    refreshes: u64,
}

impl ContextCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits,
            misses: self.misses,
            pending: self.queue.len(),
            refreshes: self.refreshes,
        }
    }

    /// Insert (or replace) an entry directly, bypassing the pipeline.
    pub fn insert(&mut self, entry: CacheEntry) {
        self.in_flight.remove(&entry.canonical_query);
        self.entries.insert(entry.canonical_query.clone(), entry);
    }

    /// Read-only probe by canonical query; touches no counters or queue.
    pub fn peek(&self, canonical: &str) -> Option<&CacheEntry> {
        self.entries.get(canonical)
    }

    /// Full lookup semantics on a raw query: normalize, then hit or
    /// miss-and-enqueue (at most one task per canonical query).
    pub fn lookup(&mut self, query: &str, normalizer: &Normalizer) -> Result<Option<CacheEntry>> {
        let canonical = normalizer.normalize(query)?;
        Ok(self.lookup_canonical(&canonical))
    }

    /// Lookup on an already-canonical query.
    pub fn lookup_canonical(&mut self, canonical: &str) -> Option<CacheEntry> {
        if let Some(entry) = self.entries.get(canonical) {
            self.hits += 1;
            return Some(entry.clone());
        }
        self.misses += 1;
        if self.in_flight.insert(canonical.to_string()) {
            self.queue.push_back(PipelineTask {
                canonical_query: canonical.to_string(),
                refresh: false,
            });
        }
        None
    }

    /// Re-enqueue entries whose last refresh is at least `ttl` old.
    pub fn refresh(&mut self, now: u64, ttl: u64) -> Result<RefreshStats> {
        if ttl == 0 {
            return Err(Error::Contract("refresh requires ttl > 0".into()));
        }
        let mut enqueued = 0;
        for (canonical, entry) in &self.entries {
            if now.saturating_sub(entry.refreshed_at) >= ttl
                && self.in_flight.insert(canonical.clone())
            {
                self.queue.push_back(PipelineTask {
                    canonical_query: canonical.clone(),
                    refresh: true,
                });
                enqueued += 1;
            }
        }
        self.refreshes += enqueued as u64;
        Ok(RefreshStats { enqueued })
    }

    /// Process every queued task: run all providers, merge their fragments
    /// (first non-empty web block, first profile), and publish the entry.
    /// The newest result replaces any previous entry wholesale; unknown
    /// queries publish an empty entry (the legitimate no-context case).
    /// Returns the number of tasks processed.
    pub fn drain(&mut self, providers: &[ContextProvider], now: u64) -> Result<usize> {
        let mut processed = 0;
        while let Some(task) = self.queue.pop_front() {
            let mut web_results = Vec::new();
            let mut profile = None;
            for p in providers {
                let frag = p.generate(&task.canonical_query)?;
                if web_results.is_empty() {
                    web_results = frag.web_results;
                }
                if profile.is_none() {
                    profile = frag.query_profile;
                }
            }
            let created_at = if task.refresh {
                self.entries
                    .get(&task.canonical_query)
                    .map(|e| e.created_at)
                    .unwrap_or(now)
            } else {
                now
            };
            let entry = CacheEntry::new(
                task.canonical_query.clone(),
                web_results,
                profile,
                created_at,
                now,
            )?;
            self.in_flight.remove(&task.canonical_query);
            self.entries.insert(task.canonical_query, entry);
            processed += 1;
        }
        Ok(processed)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.values()
    }
}

/// Thread-safe wrapper: concurrent readers via `peek`, exclusive writers
/// for lookup/drain/refresh. The pipeline publishes whole entries under the
/// write lock, so readers never observe a partial record.
#[derive(Clone, Default)]
pub struct SharedCache {
    inner: Arc<RwLock<ContextCache>>,
}

impl SharedCache {
    pub fn new(cache: ContextCache) -> Self {
        SharedCache {
            inner: Arc::new(RwLock::new(cache)),
        }
    }

    pub fn peek(&self, canonical: &str) -> Option<CacheEntry> {
        self.inner.read().expect("cache lock").peek(canonical).cloned()
    }

    pub fn lookup_canonical(&self, canonical: &str) -> Option<CacheEntry> {
        self.inner.write().expect("cache lock").lookup_canonical(canonical)
    }

    pub fn drain(&self, providers: &[ContextProvider], now: u64) -> Result<usize> {
        self.inner.write().expect("cache lock").drain(providers, now)
    }

    pub fn refresh(&self, now: u64, ttl: u64) -> Result<RefreshStats> {
        self.inner.write().expect("cache lock").refresh(now, ttl)
    }

    pub fn stats(&self) -> CacheStats {
        self.inner.read().expect("cache lock").stats()
    }

    pub fn with<R>(&self, f: impl FnOnce(&ContextCache) -> R) -> R {
        f(&self.inner.read().expect("cache lock"))
    }
}

// ---------------------------------------------------------------------------
// Persistence: line-delimited records, one canonical query per line, fields
// tab-separated; list items joined by ',' with '|' between sub-fields, all
// escaped.
// ---------------------------------------------------------------------------

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            ',' => out.push_str("\\,"),
            '|' => out.push_str("\\|"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some(',') => out.push(','),
            Some('|') => out.push('|'),
            other => {
                return Err(Error::Contract(format!(
                    "bad escape sequence \\{}",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Split on a separator, honoring backslash escapes.
fn split_escaped(s: &str, sep: char) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut escaped = false;
    for c in s.chars() {
        if escaped {
            parts.last_mut().unwrap().push(c);
            escaped = false;
        } else if c == '\\' {
            parts.last_mut().unwrap().push(c);
            escaped = true;
        } else if c == sep {
            parts.push(String::new());
        } else {
            parts.last_mut().unwrap().push(c);
        }
    }
    parts
}

pub fn entry_to_line(e: &CacheEntry) -> String {
    let web = e
        .web_results
        .iter()
        .map(|r| {
            format!(
                "{}|{}|{}|{}",
                escape(&r.title),
                escape(&r.snippet),
                escape(&r.country),
                r.timestamp
            )
        })
        .collect::<Vec<_>>()
        .join(",");
    let (rewrites, intent) = match &e.query_profile {
        Some(p) => (
            p.rewrites.iter().map(|r| escape(r)).collect::<Vec<_>>().join(","),
            escape(&p.intent),
        ),
        None => (String::new(), String::new()),
    };
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        escape(&e.canonical_query),
        e.created_at,
        e.refreshed_at,
        web,
        rewrites,
        intent
    )
}

pub fn entry_from_line(line: &str, path: &str, lineno: usize) -> Result<CacheEntry> {
    let fmt_err = |reason: String| Error::Format {
        path: path.to_string(),
        reason: format!("line {lineno}: {reason}"),
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(fmt_err(format!("expected 6 fields, found {}", fields.len())));
    }
    let canonical = unescape(fields[0]).map_err(|e| fmt_err(e.to_string()))?;
    let created_at: u64 = fields[1]
        .parse()
        .map_err(|_| fmt_err(format!("bad created_at {:?}", fields[1])))?;
    let refreshed_at: u64 = fields[2]
        .parse()
        .map_err(|_| fmt_err(format!("bad refreshed_at {:?}", fields[2])))?;
    let mut web_results = Vec::new();
    if !fields[3].is_empty() {
        for item in split_escaped(fields[3], ',') {
            let sub = split_escaped(&item, '|');
            if sub.len() != 4 {
                return Err(fmt_err(format!(
                    "web result needs 4 sub-fields, found {}",
                    sub.len()
                )));
            }
            web_results.push(WebResult {
                title: unescape(&sub[0]).map_err(|e| fmt_err(e.to_string()))?,
                snippet: unescape(&sub[1]).map_err(|e| fmt_err(e.to_string()))?,
                country: unescape(&sub[2]).map_err(|e| fmt_err(e.to_string()))?,
                timestamp: sub[3]
                    .parse()
                    .map_err(|_| fmt_err(format!("bad timestamp {:?}", sub[3])))?,
            });
        }
    }
    let profile = if fields[4].is_empty() && fields[5].is_empty() {
        None
    } else {
        let rewrites: Result<Vec<String>> = split_escaped(fields[4], ',')
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| unescape(s))
            .collect();
        Some(QueryProfile {
            rewrites: rewrites.map_err(|e| fmt_err(e.to_string()))?,
            intent: unescape(fields[5]).map_err(|e| fmt_err(e.to_string()))?,
        })
    };
    CacheEntry::new(canonical, web_results, profile, created_at, refreshed_at)
        .map_err(|e| fmt_err(e.to_string()))
}

pub fn save_cache(cache: &ContextCache, path: &Path) -> Result<()> {
    let mut out = String::new();
    for entry in cache.entries() {
        out.push_str(&entry_to_line(entry));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<ContextCache> {
    let text = fs::read_to_string(path)?;
    let mut cache = ContextCache::new();
    let display = path.display().to_string();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        cache.insert(entry_from_line(line, &display, i + 1)?);
    }
    Ok(cache)
}
