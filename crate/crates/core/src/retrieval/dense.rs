use std::fs;
use std::path::Path;

use crate::checksum::crc32;
use crate::error::{Error, Result};
use crate::model::{keyword_bundle, TokenSegment, UnityModel};
use crate::numerics::Tape;

use super::beam::{RetrievalPath, RetrievalResult};

const INDEX_MAGIC: &[u8; 7] = b"AUGIDX1";

/// Exact dense retrieval index: one unit-norm embedding row per corpus keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    pub dim: usize,
    /// Row-major `len x dim`, each row L2-normalized.
    pub embeddings: Vec<f32>,
}

impl DenseIndex {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.embeddings.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.embeddings[i * self.dim..(i + 1) * self.dim]
    }

    /// Build from raw embedding rows, normalizing each; a zero row is an error.
    pub fn from_rows(dim: usize, mut embeddings: Vec<f32>) -> Result<Self> {
        if dim == 0 || embeddings.len() % dim != 0 {
            return Err(Error::Dimension {
                op: "dense_index_rows",
                lhs: vec![embeddings.len()],
                rhs: vec![dim],
            });
        }
        for (i, row) in embeddings.chunks_mut(dim).enumerate() {
            normalize_row(row).map_err(|_| {
                Error::Numeric(format!("keyword {i} has a zero or non-finite embedding"))
            })?;
        }
        Ok(DenseIndex { dim, embeddings })
    }
}

fn normalize_row(row: &mut [f32]) -> Result<()> {
    let mut sq = 0.0f64;
    for &x in row.iter() {
        if !x.is_finite() {
            return Err(Error::Numeric("non-finite embedding value".into()));
        }
        sq += (x as f64) * (x as f64);
    }
    let norm = sq.sqrt();
    if norm < 1e-12 {
        return Err(Error::Numeric("zero-norm embedding".into()));
    }
    for x in row.iter_mut() {
        *x = ((*x as f64) / norm) as f32;
    }
    Ok(())
}

/// Embed every corpus keyword (as a context-free query) and build the index.
pub fn embed_corpus(model: &UnityModel, corpus: &[TokenSegment]) -> Result<DenseIndex> {
    if corpus.is_empty() {
        return Err(Error::Corpus("empty corpus".into()));
    }
    let dim = model.config.dense_size;
    let mut embeddings = Vec::with_capacity(corpus.len() * dim);
    for kw in corpus {
        let bundle = keyword_bundle(&kw.ids, &model.config)?;
        let mut tape = Tape::over(&model.params);
        let emb = model.embed_query(&mut tape, &bundle)?;
        embeddings.extend_from_slice(tape.value(emb));
    }
    DenseIndex::from_rows(dim, embeddings)
}

/// Exact top-k by cosine similarity. The query is normalized internally, so
/// scores are cosines in [-1, 1]. Ties break toward the lower keyword id.
pub fn dense_topk(index: &DenseIndex, query: &[f32], k: usize) -> Result<Vec<RetrievalResult>> {
    if query.len() != index.dim {
        return Err(Error::Dimension {
            op: "dense_topk",
            lhs: vec![query.len()],
            rhs: vec![index.dim],
        });
    }
    let n = index.len();
    if k < 1 || k > n {
        return Err(Error::Contract(format!(
            "dense_topk requires 1 <= k <= corpus size, got k={k} with {n} keywords"
        )));
    }
    let mut q = query.to_vec();
    normalize_row(&mut q)?;
    let mut scored: Vec<(u32, f32)> = (0..n)
        .map(|i| {
            let row = index.row(i);
            let dot: f32 = row.iter().zip(&q).map(|(a, b)| a * b).sum();
            (i as u32, dot)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(keyword_id, score)| RetrievalResult {
            keyword_id,
            score,
            path: RetrievalPath::Dr,
        })
        .collect())
}

/// Serialize: magic, dim and row count as u32 LE, rows as f32 LE, CRC32 trailer.
pub fn index_bytes(index: &DenseIndex) -> Vec<u8> {
    let mut buf = Vec::with_capacity(INDEX_MAGIC.len() + 8 + index.embeddings.len() * 4 + 4);
    buf.extend_from_slice(INDEX_MAGIC);
    buf.extend_from_slice(&(index.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(index.len() as u32).to_le_bytes());
    for x in &index.embeddings {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn save_index(index: &DenseIndex, path: &Path) -> Result<()> {
    fs::write(path, index_bytes(index))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<DenseIndex> {
    let fmt_err = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };
    let buf = fs::read(path)?;
    let head = INDEX_MAGIC.len();
    if buf.len() < head + 12 {
        return Err(fmt_err("index file too short".into()));
    }
    if &buf[..head] != INDEX_MAGIC {
        return Err(fmt_err("bad index magic".into()));
    }
    let body = &buf[..buf.len() - 4];
    let stored = u32::from_le_bytes(buf[buf.len() - 4..].try_into().unwrap());
    let actual = crc32(body);
    if stored != actual {
        return Err(fmt_err(format!(
            "checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"
        )));
    }
    let dim = u32::from_le_bytes(buf[head..head + 4].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(buf[head + 4..head + 8].try_into().unwrap()) as usize;
    let expected = head + 8 + dim * count * 4 + 4;
    if buf.len() != expected {
        return Err(fmt_err(format!(
            "file has {} bytes, expected {expected} for {count} rows of {dim}",
            buf.len()
        )));
    }
    let mut embeddings = Vec::with_capacity(dim * count);
    let mut at = head + 8;
    for _ in 0..dim * count {
        embeddings.push(f32::from_le_bytes(buf[at..at + 4].try_into().unwrap()));
        at += 4;
    }
    Ok(DenseIndex { dim, embeddings })
}
