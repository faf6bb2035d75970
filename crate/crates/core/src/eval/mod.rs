//! Offline evaluation: synthetic world generation with ground-truth match
//! labels, the rule-based match-type judge, Precision@K, and the ablation
//! grid over serving-context compositions.

mod ablation;
mod dataset;
mod judge;
mod world;

pub use ablation::{
    evaluate_cell, evaluate_paths, report_csv, report_table, run_ablation, AblationCell,
    AblationGrid, AblationReport, CellResult, EvalSetup, ReportRow, MATCH_TYPES, REPORT_HEADER,
};
pub use dataset::{build_training_pairs, intent_entry, warm_cache, world_providers};
pub use judge::{judge, precision_at_k, JudgeLabel};
pub use world::{
    generate_world, load_corpus_lines, load_world, save_corpus, save_world, Intent, Surface,
    SyntheticWorld, WorldConfig, WorldDocument, WorldKeyword, WorldPair, WorldProfile, WorldQuery,
};
