//! The retrieval network: shared encoder, fusion of independently encoded
//! segments, bidirectional NAR decoder, dense-embedding head, token head.

mod checkpoint;
mod config;
mod segments;
mod unity;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint};
pub use config::{MaxLens, ModelConfig, MAX_CONTEXTS, MAX_RANKS};
pub use segments::{
    keyword_bundle, ContextBundle, EncodedStates, SegmentKind, TokenSegment, EOS_ID,
    FIRST_WORD_ID, MARKER_INTENT, MARKER_REWRITE, MARKER_SNIPPET, MARKER_TITLE, PAD_ID, UNK_ID,
};
pub use unity::{ForwardOut, UnityModel};
