//! Minimal tensor and reverse-mode autodiff core.
//!
//! Deliberately not a general framework: the op vocabulary is sized to
//! exactly the fixed transformer architecture used by the model module.
//! Forward and backward run in f32; test oracles use f64.
//!
//! A [`Tape`] records a compute graph over borrowed, read-only parameters
//! plus tape-owned intermediate values. Graph construction and backward are
//! single-threaded per tape; tensors with populated data and no pending
//! graph are immutable and may be shared read-only across threads (the
//! training loop runs one tape per batch element).

mod linalg;
mod tape;
mod tensor;

pub use tape::{AttnMask, Gradients, NodeId, Op, Tape};
pub use tensor::{ParamSet, Tensor};
