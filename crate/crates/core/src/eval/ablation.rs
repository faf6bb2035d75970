use std::collections::BTreeMap;
use std::path::Path;

use crate::context::{assemble_bundle, BundleLimits, ContextCache, Tokenizer};
use crate::error::Result;
use crate::model::{load_checkpoint, ModelConfig, UnityModel};
use crate::numerics::Tape;
use crate::retrieval::{
    dense_topk, embed_corpus, nar_beam_search, DenseIndex, KeywordTrie, RetrievalPath,
};
use crate::training::MatchType;

use super::judge::{judge, precision_at_k, JudgeLabel};
use super::world::SyntheticWorld;

pub const MATCH_TYPES: [MatchType; 3] = [MatchType::Exact, MatchType::Phrase, MatchType::Smart];

/// Everything an evaluation pass reads besides the model: the world (test
/// queries + judge), tokenizer, warmed cache, and retrieval settings.
pub struct EvalSetup<'a> {
    pub world: &'a SyntheticWorld,
    pub tok: &'a Tokenizer,
    pub cache: &'a ContextCache,
    pub config: &'a ModelConfig,
    pub ks: Vec<usize>,
    pub beam: usize,
}

/// Mean Precision@K per (match type, k) over the test queries of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub per: Vec<(MatchType, usize, f64)>,
    pub n_queries: usize,
}

impl CellResult {
    pub fn precision(&self, match_type: MatchType, k: usize) -> Option<f64> {
        self.per
            .iter()
            .find(|(mt, kk, _)| *mt == match_type && *kk == k)
            .map(|(_, _, p)| *p)
    }
}

/// Evaluate one model under one serving-context composition, producing
/// results for both retrieval paths in a single forward pass per query.
pub fn evaluate_paths(
    setup: &EvalSetup,
    model: &UnityModel,
    index: &DenseIndex,
    trie: &KeywordTrie,
    limits: &BundleLimits,
) -> Result<BTreeMap<&'static str, CellResult>> {
    let k_max = setup.ks.iter().copied().max().unwrap_or(10);
    let dense_k = k_max.min(index.len());
    let beam = setup.beam.max(k_max);
    let l0 = setup.config.max_len.query;
    let vocab = setup.config.vocab_size;

    let mut sums: BTreeMap<(&'static str, MatchType, usize), f64> = BTreeMap::new();
    let n_queries = setup.world.test_queries.len();

    for query in &setup.world.test_queries {
        let entry = setup.cache.peek(&query.surface);
        let bundle = assemble_bundle(entry, &query.surface, setup.tok, limits, setup.config)?;
        let mut tape = Tape::over(&model.params);
        let out = model.forward(&mut tape, &bundle)?;
        let emb = tape.value(out.embedding).to_vec();
        let logits = tape.value(out.logits).to_vec();

        let dr = dense_topk(index, &emb, dense_k)?;
        let nlg = nar_beam_search(&logits, l0, vocab, trie, beam, k_max)?;

        for (path_name, results) in [("dr", &dr), ("nlg", &nlg)] {
            let labels: Vec<JudgeLabel> = results
                .iter()
                .map(|r| judge(setup.world, query.intent, r.keyword_id))
                .collect::<Result<_>>()?;
            for mt in MATCH_TYPES {
                for &k in &setup.ks {
                    let p = precision_at_k(results, &labels, k, mt)?;
                    *sums.entry((path_name, mt, k)).or_insert(0.0) += p;
                }
            }
        }
    }

    let mut out = BTreeMap::new();
    for path_name in ["dr", "nlg"] {
        let per: Vec<(MatchType, usize, f64)> = MATCH_TYPES
            .iter()
            .flat_map(|&mt| setup.ks.iter().map(move |&k| (mt, k)))
            .map(|(mt, k)| {
                let sum = sums.get(&(path_name, mt, k)).copied().unwrap_or(0.0);
                (mt, k, sum / n_queries.max(1) as f64)
            })
            .collect();
        out.insert(path_name, CellResult { per, n_queries });
    }
    Ok(out)
}

/// Evaluate a single (model, limits, path) cell.
pub fn evaluate_cell(
    setup: &EvalSetup,
    model: &UnityModel,
    index: &DenseIndex,
    trie: &KeywordTrie,
    limits: &BundleLimits,
    path: RetrievalPath,
) -> Result<CellResult> {
    let both = evaluate_paths(setup, model, index, trie, limits)?;
    Ok(both[path.name()].clone())
}

/// One declared grid cell: which checkpoint file, which serving contexts,
/// which retrieval path.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub name: String,
    pub checkpoint: String,
    pub limits: BundleLimits,
    pub path: RetrievalPath,
}

#[derive(Debug, Clone)]
pub struct AblationGrid {
    pub cells: Vec<AblationCell>,
    pub ks: Vec<usize>,
    pub beam: usize,
}

impl AblationGrid {
    /// Cells for one checkpoint over named context subsets and paths, in
    /// declaration order.
    pub fn from_subsets(
        checkpoint: &str,
        subsets: &[&str],
        paths: &[RetrievalPath],
    ) -> Result<Self> {
        let mut cells = Vec::new();
        for subset in subsets {
            let limits = BundleLimits::subset(subset)?;
            for &path in paths {
                cells.push(AblationCell {
                    name: format!("{subset}/{}", path.name()),
                    checkpoint: checkpoint.to_string(),
                    limits,
                    path,
                });
            }
        }
        Ok(AblationGrid { cells, ks: vec![10, 20], beam: 32 })
    }

    /// Cells sweeping total context counts for one checkpoint.
    pub fn from_counts(
        checkpoint: &str,
        counts: &[usize],
        paths: &[RetrievalPath],
    ) -> Result<Self> {
        let mut cells = Vec::new();
        for &n in counts {
            let limits = BundleLimits::with_total(n)?;
            for &path in paths {
                cells.push(AblationCell {
                    name: format!("n{n}/{}", path.name()),
                    checkpoint: checkpoint.to_string(),
                    limits,
                    path,
                });
            }
        }
        Ok(AblationGrid { cells, ks: vec![10, 20], beam: 32 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub cell: String,
    pub match_type: MatchType,
    pub k: usize,
    pub precision: f64,
    pub n_queries: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<ReportRow>,
    /// Cells whose checkpoint could not be loaded, in declaration order.
    pub absent: Vec<String>,
}

pub const REPORT_HEADER: &str = "cell,match_type,k,precision,n_queries";

pub fn report_csv(report: &AblationReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{}\n",
            row.cell,
            row.match_type.name(),
            row.k,
            row.precision,
            row.n_queries
        ));
    }
    for name in &report.absent {
        out.push_str(&format!("{name},absent,,,\n"));
    }
    out
}

/// Aligned human-readable table alongside the CSV.
pub fn report_table(report: &AblationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>8} {:>4} {:>10} {:>10}\n",
        "cell", "match", "k", "P@k", "queries"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<24} {:>8} {:>4} {:>10.4} {:>10}\n",
            row.cell,
            row.match_type.name(),
            row.k,
            row.precision,
            row.n_queries
        ));
    }
    for name in &report.absent {
        out.push_str(&format!("{name:<24} (absent: checkpoint missing)\n"));
    }
    out
}

/// Run the declared grid against checkpoints under `model_dir`. A missing
/// or unreadable checkpoint marks its cells absent and the run continues.
pub fn run_ablation(
    grid: &AblationGrid,
    model_dir: &Path,
    world: &SyntheticWorld,
    config: &ModelConfig,
) -> Result<AblationReport> {
    let tok = world.tokenizer(config.vocab_size)?;
    let cache = super::dataset::warm_cache(world, world.seed, 0)?;
    let corpus = world.corpus_segments(&tok, config)?;
    let trie = KeywordTrie::build(&corpus)?;
    let setup = EvalSetup {
        world,
        tok: &tok,
        cache: &cache,
        config,
        ks: grid.ks.clone(),
        beam: grid.beam,
    };

    let mut models: BTreeMap<String, Option<(UnityModel, DenseIndex)>> = BTreeMap::new();
    type LimitsKey = (usize, usize, usize, usize);
    let mut cell_cache: BTreeMap<(String, LimitsKey), BTreeMap<&'static str, CellResult>> =
        BTreeMap::new();

    let mut report = AblationReport::default();
    for cell in &grid.cells {
        let loaded = models.entry(cell.checkpoint.clone()).or_insert_with(|| {
            let path = model_dir.join(&cell.checkpoint);
            match load_checkpoint(&path, Some(config)) {
                Ok(model) => match embed_corpus(&model, &corpus) {
                    Ok(index) => Some((model, index)),
                    Err(_) => None,
                },
                Err(_) => None,
            }
        });
        let Some((model, index)) = loaded else {
            report.absent.push(cell.name.clone());
            continue;
        };
        let key = (
            cell.checkpoint.clone(),
            (
                cell.limits.titles,
                cell.limits.snippets,
                cell.limits.rewrites,
                cell.limits.intents,
            ),
        );
        if !cell_cache.contains_key(&key) {
            let result = evaluate_paths(&setup, model, index, &trie, &cell.limits)?;
            cell_cache.insert(key.clone(), result);
        }
        let result = &cell_cache[&key][cell.path.name()];
        for &(mt, k, p) in &result.per {
            report.rows.push(ReportRow {
                cell: cell.name.clone(),
                match_type: mt,
                k,
                precision: p,
                n_queries: result.n_queries,
            });
        }
    }
    Ok(report)
}
