//! Context-augmented keyword retrieval for sponsored search.
//!
//! A single shared encoder / non-autoregressive decoder model serves two
//! retrieval paths over a bid-keyword corpus: dense retrieval (cosine top-k
//! over an exact embedding index) and generative retrieval (trie-constrained
//! parallel decoding). Queries are enriched with cached context signals --
//! web titles and snippets plus LLM-style query profiles -- encoded
//! independently per segment and fused in the decoder's cross-attention, so
//! inference cost grows linearly in the number of context segments.
//! Training couples a token-level NLL objective with an in-batch contrastive
//! objective and applies a context-glancing curriculum that progressively
//! drops context signals, keeping the model usable on cache misses.

pub mod checksum;
pub mod cli;
pub mod context;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod retrieval;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
