//! Keyword retrieval: trie-constrained generative beam search and exact
//! dense cosine search over corpus embeddings.

mod beam;
mod dense;
mod trie;

pub use beam::{log_softmax_rows, nar_beam_search, RetrievalPath, RetrievalResult};
pub use dense::{
    dense_topk, embed_corpus, index_bytes, load_index, save_index, DenseIndex,
};
pub use trie::KeywordTrie;
