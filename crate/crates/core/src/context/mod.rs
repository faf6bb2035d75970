//! Query-context machinery: normalization, the tokenizer, the online
//! cache with its asynchronous miss pipeline, synthetic context providers,
//! and bundle assembly for the model.

mod assemble;
mod cache;
mod normalize;
mod providers;
mod tokenizer;

pub use assemble::{assemble_bundle, BundleLimits, CONTEXT_SUBSETS};
pub use cache::{
    entry_from_line, entry_to_line, load_cache, save_cache, CacheEntry, CacheStats, ContextCache,
    QueryProfile, RefreshStats, SharedCache, WebResult, MAX_WEB_RESULTS,
};
pub use normalize::{within_one_edit, Normalizer};
pub use providers::{
    ContextProvider, ProviderFragment, ProviderKind, SimDocument, SimProfile, WorldSource,
};
pub use tokenizer::Tokenizer;
