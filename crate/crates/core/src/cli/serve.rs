//! Interactive retrieval loop: normalize, consult the context cache, run
//! both retrieval paths, and answer on stdout. Misses enqueue pipeline
//! tasks; `drain` runs the providers, `stats` prints the counters.

use std::io::{BufRead, Write};

use clap::Args;

use crate::context::{
    assemble_bundle, load_cache, BundleLimits, ContextCache, ContextProvider, Normalizer,
    Tokenizer,
};
use crate::error::Result;
use crate::eval::{load_corpus_lines, load_world, world_providers};
use crate::model::{
    load_checkpoint, ModelConfig, SegmentKind, TokenSegment, UnityModel, UNK_ID,
};
use crate::retrieval::{
    dense_topk, embed_corpus, nar_beam_search, DenseIndex, KeywordTrie, RetrievalResult,
};

use super::{require_file, CliConfig};

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Results per retrieval path.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    /// Beam width for the generative path.
    #[arg(long, default_value_t = 32)]
    pub beam: usize,

    /// Context subset assembled on cache hits.
    #[arg(long, default_value = "all")]
    pub contexts: String,
}

impl Default for ServeArgs {
    fn default() -> Self {
        ServeArgs { k: 10, beam: 32, contexts: "all".into() }
    }
}

struct ServeState {
    model: UnityModel,
    config: ModelConfig,
    tok: Tokenizer,
    normalizer: Normalizer,
    providers: Vec<ContextProvider>,
    cache: ContextCache,
    corpus_text: Vec<String>,
    index: DenseIndex,
    trie: KeywordTrie,
    limits: BundleLimits,
    k: usize,
    beam: usize,
    /// Logical clock stamped onto drained entries.
    now: u64,
}

impl ServeState {
    fn load(config: &CliConfig, args: &ServeArgs) -> Result<Self> {
        let limits = BundleLimits::subset(&args.contexts)?;
        require_file(&config.paths.checkpoint, "run train first")?;
        require_file(&config.paths.world, "run gen-world first")?;
        require_file(&config.paths.corpus, "run gen-world first")?;

        let model = load_checkpoint(&config.paths.checkpoint, None)?;
        let mc = model.config.clone();
        let world = load_world(&config.paths.world)?;
        let tok = world.tokenizer(mc.vocab_size)?;
        let normalizer = world.normalizer();
        let providers = world_providers(&world, config.seed);

        let corpus_text = load_corpus_lines(&config.paths.corpus)?;
        let segments: Vec<TokenSegment> = corpus_text
            .iter()
            .map(|kw| {
                let ids: Vec<u32> =
                    tok.encode(kw).into_iter().take(mc.max_len.query).collect();
                TokenSegment::new(SegmentKind::Query, ids, 0, &mc)
            })
            .collect::<Result<_>>()?;
        let index = embed_corpus(&model, &segments)?;
        let trie = KeywordTrie::build(&segments)?;

        let cache = if config.paths.cache.is_file() {
            load_cache(&config.paths.cache)?
        } else {
            ContextCache::new()
        };

        Ok(ServeState {
            model,
            config: mc,
            tok,
            normalizer,
            providers,
            cache,
            corpus_text,
            index,
            trie,
            limits,
            k: args.k,
            beam: args.beam,
            now: 1,
        })
    }

    fn answer(&mut self, line: &str, out: &mut impl Write) -> Result<()> {
        let canonical = self.normalizer.normalize(line)?;
        if self.tok.encode(&canonical).iter().all(|&id| id == UNK_ID) {
            return Err(crate::error::Error::Contract(format!(
                "no word of {canonical:?} is in the corpus vocabulary"
            )));
        }
        let entry = self.cache.lookup_canonical(&canonical);
        let flag = if entry.is_some() { "hit" } else { "miss" };
        let bundle =
            assemble_bundle(entry.as_ref(), &canonical, &self.tok, &self.limits, &self.config)?;
        let mut tape = self.model.tape();
        let fwd = self.model.forward(&mut tape, &bundle)?;
        let emb = tape.value(fwd.embedding).to_vec();
        let logits = tape.value(fwd.logits).to_vec();

        let k = self.k.min(self.index.len());
        let dr = dense_topk(&self.index, &emb, k)?;
        let nlg = nar_beam_search(
            &logits,
            self.config.max_len.query,
            self.config.vocab_size,
            &self.trie,
            self.beam.max(self.k),
            self.k,
        )?;
        writeln!(out, "query: {canonical} [{flag}] contexts={}", bundle.n())?;
        self.print_results(out, "dr", &dr)?;
        self.print_results(out, "nlg", &nlg)?;
        Ok(())
    }

    fn print_results(
        &self,
        out: &mut impl Write,
        label: &str,
        results: &[RetrievalResult],
    ) -> Result<()> {
        for (rank, r) in results.iter().enumerate() {
            let text = self
                .corpus_text
                .get(r.keyword_id as usize)
                .map(String::as_str)
                .unwrap_or("<unknown keyword id>");
            writeln!(out, "  {label:<4} {:>2} {:+.4} {text}", rank + 1, r.score)?;
        }
        Ok(())
    }
}

/// Run the loop until EOF. One query per line; `drain` runs pending
/// pipeline tasks, `stats` prints counters. A malformed line (invalid
/// UTF-8, or a query with no in-vocabulary words) prints a warning and the
/// loop continues.
pub fn cmd_serve(
    config: &CliConfig,
    args: &ServeArgs,
    input: impl BufRead,
    out: &mut impl Write,
) -> Result<()> {
    let mut state = ServeState::load(config, args)?;
    writeln!(
        out,
        "serving {} keywords under --contexts {} ({} cache entries); \
         enter a query, 'drain', or 'stats'",
        state.corpus_text.len(),
        args.contexts,
        state.cache.len(),
    )?;
    out.flush()?;

    let mut input = input;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        let Ok(text) = std::str::from_utf8(&buf) else {
            writeln!(out, "warning: line is not valid UTF-8")?;
            out.flush()?;
            continue;
        };
        let line = text.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "stats" => {
                let s = state.cache.stats();
                writeln!(
                    out,
                    "stats: hits={} misses={} pending={} refreshes={} entries={}",
                    s.hits,
                    s.misses,
                    s.pending,
                    s.refreshes,
                    state.cache.len()
                )?;
            }
            "drain" => {
                let stamp = state.now;
                state.now += 1;
                match state.cache.drain(&state.providers, stamp) {
                    Ok(n) => writeln!(out, "drained {n} pending task(s)")?,
                    Err(e) => writeln!(out, "warning: {e}")?,
                }
            }
            query => {
                if let Err(e) = state.answer(query, out) {
                    writeln!(out, "warning: {e}")?;
                }
            }
        }
        out.flush()?;
    }
    Ok(())
}
