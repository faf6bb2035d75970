//! Joint NLG + dense-retrieval objective, the context-glancing curriculum,
//! Adam with a warm-up/decay schedule, and the epoch loop.

mod glancing;
mod losses;
mod optimizer;
mod run;

pub use glancing::{apply_glancing, draw_category, GlanceCategory, GlanceRates, GlanceSchedule};
pub use losses::{
    combined_loss, contrastive_loss, nlg_loss, nlg_targets, CombinedOut, LossWeights, MatchType,
    TrainingPair,
};
pub use optimizer::OptimizerState;
pub use run::{stats_csv, train_epoch, train_run, EpochStats, TrainConfig, STATS_HEADER};
