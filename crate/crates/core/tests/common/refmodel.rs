//! Independent f64 re-implementation of the full model forward pass and the
//! combined training loss, reading weights by name out of a `ParamSet`.
//! Shares no code with the production tape (only the pure-integer target
//! alignment and bundle constructors), so the full-model gradient check can
//! central-difference the loss through a second, independently written path.

use std::collections::HashMap;

use augu::model::{keyword_bundle, ContextBundle, ModelConfig, TokenSegment, MAX_RANKS};
use augu::numerics::ParamSet;
use augu::training::{nlg_targets, TrainingPair};

use super::oracle;

/// f64 mirror of the model: parameter data widened once at construction,
/// perturbable in place for finite differences.
pub struct RefModel {
    pub cfg: ModelConfig,
    /// Widened parameter data, index-aligned with the source ParamSet.
    pub data: Vec<Vec<f64>>,
    pub shapes: Vec<Vec<usize>>,
    by_name: HashMap<String, usize>,
}

/// Row-major matmul with the accumulation order of `oracle::matmul` but a
/// cache-friendly loop nest; the full-model check multiplies far larger
/// matrices than the per-op checks do.
fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn add_row_bias(x: &[f64], bias: &[f64]) -> Vec<f64> {
    x.chunks(bias.len())
        .flat_map(|row| row.iter().zip(bias).map(|(v, b)| v + b))
        .collect()
}

impl RefModel {
    pub fn from_params(cfg: &ModelConfig, params: &ParamSet) -> Self {
        let mut data = Vec::with_capacity(params.len());
        let mut shapes = Vec::with_capacity(params.len());
        let mut by_name = HashMap::new();
        for i in 0..params.len() {
            let t = params.get(i);
            data.push(t.data.iter().map(|&v| v as f64).collect());
            shapes.push(t.shape.clone());
            by_name.insert(params.name(i).to_string(), i);
        }
        RefModel {
            cfg: cfg.clone(),
            data,
            shapes,
            by_name,
        }
    }

    fn p(&self, name: &str) -> &[f64] {
        let idx = *self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("refmodel: no parameter named '{name}'"));
        &self.data[idx]
    }

    /// Token + position + kind + rank embeddings for one segment (l x d).
    fn embed_input(&self, seg: &TokenSegment) -> Vec<f64> {
        let d = self.cfg.hidden_size;
        let tok = self.p("tok_emb");
        let pos = self.p("pos_emb");
        let kind = self.p("kind_emb");
        let rank = self.p("rank_emb");
        let kind_row = &kind[seg.kind.index() * d..(seg.kind.index() + 1) * d];
        let rank_idx = seg.source_rank.min(MAX_RANKS - 1);
        let rank_row = &rank[rank_idx * d..(rank_idx + 1) * d];
        let mut out = Vec::with_capacity(seg.len() * d);
        for (r, &id) in seg.ids.iter().enumerate() {
            let tok_row = &tok[id as usize * d..(id as usize + 1) * d];
            let pos_row = &pos[r * d..(r + 1) * d];
            for j in 0..d {
                out.push(tok_row[j] + pos_row[j] + kind_row[j] + rank_row[j]);
            }
        }
        out
    }

    /// One pre-LN self-attention + FFN encoder block.
    fn encoder_block(&self, x: &[f64], l: usize, prefix: &str, valid: &[bool]) -> Vec<f64> {
        let d = self.cfg.hidden_size;
        let heads = self.cfg.num_heads;
        let a = oracle::layer_norm(x, self.p(&format!("{prefix}.ln1.g")), self.p(&format!("{prefix}.ln1.b")), d);
        let q = matmul(&a, self.p(&format!("{prefix}.attn.wq")), l, d, d);
        let k = matmul(&a, self.p(&format!("{prefix}.attn.wk")), l, d, d);
        let v = matmul(&a, self.p(&format!("{prefix}.attn.wv")), l, d, d);
        let att = oracle::attention(&q, &k, &v, l, l, d, heads, Some(valid), false);
        let proj = matmul(&att, self.p(&format!("{prefix}.attn.wo")), l, d, d);
        let h = add(x, &proj);
        self.ffn_block(&h, l, &format!("{prefix}.ln2"), &format!("{prefix}.ffn"))
    }

    fn ffn_block(&self, x: &[f64], l: usize, ln: &str, ffn: &str) -> Vec<f64> {
        let d = self.cfg.hidden_size;
        let f = self.cfg.ffn_size;
        let a = oracle::layer_norm(x, self.p(&format!("{ln}.g")), self.p(&format!("{ln}.b")), d);
        let h1 = matmul(&a, self.p(&format!("{ffn}.w1")), l, d, f);
        let h1b = add_row_bias(&h1, self.p(&format!("{ffn}.b1")));
        let act: Vec<f64> = h1b.iter().map(|&v| oracle::gelu(v)).collect();
        let h2 = matmul(&act, self.p(&format!("{ffn}.w2")), l, f, d);
        let h2b = add_row_bias(&h2, self.p(&format!("{ffn}.b2")));
        add(x, &h2b)
    }

    /// H^i = enc(C^i): encode one segment independently (l x d).
    fn encode_segment(&self, seg: &TokenSegment) -> Vec<f64> {
        let d = self.cfg.hidden_size;
        let valid = seg.valid_mask();
        let mut h = self.embed_input(seg);
        for i in 0..self.cfg.num_encoder_layers {
            h = self.encoder_block(&h, seg.len(), &format!("enc{i}"), &valid);
        }
        oracle::layer_norm(&h, self.p("enc.ln.g"), self.p("enc.ln.b"), d)
    }

    /// NAR decoder over the query positions, cross-attending over fused rows.
    fn decode(&self, query: &TokenSegment, fused: &[f64], lf: usize, fused_valid: &[bool]) -> Vec<f64> {
        let d = self.cfg.hidden_size;
        let heads = self.cfg.num_heads;
        let lq = query.len();
        let self_valid = query.valid_mask();
        let mut h = self.embed_input(query);
        for i in 0..self.cfg.num_decoder_layers {
            let pre = format!("dec{i}");
            // self-attention
            let a = oracle::layer_norm(&h, self.p(&format!("{pre}.ln1.g")), self.p(&format!("{pre}.ln1.b")), d);
            let q = matmul(&a, self.p(&format!("{pre}.self.wq")), lq, d, d);
            let k = matmul(&a, self.p(&format!("{pre}.self.wk")), lq, d, d);
            let v = matmul(&a, self.p(&format!("{pre}.self.wv")), lq, d, d);
            let att = oracle::attention(&q, &k, &v, lq, lq, d, heads, Some(&self_valid), false);
            let proj = matmul(&att, self.p(&format!("{pre}.self.wo")), lq, d, d);
            h = add(&h, &proj);
            // cross-attention over fused states
            let a = oracle::layer_norm(&h, self.p(&format!("{pre}.ln2.g")), self.p(&format!("{pre}.ln2.b")), d);
            let q = matmul(&a, self.p(&format!("{pre}.cross.wq")), lq, d, d);
            let k = matmul(fused, self.p(&format!("{pre}.cross.wk")), lf, d, d);
            let v = matmul(fused, self.p(&format!("{pre}.cross.wv")), lf, d, d);
            let att = oracle::attention(&q, &k, &v, lq, lf, d, heads, Some(fused_valid), false);
            let proj = matmul(&att, self.p(&format!("{pre}.cross.wo")), lq, d, d);
            h = add(&h, &proj);
            // feed-forward
            h = self.ffn_block(&h, lq, &format!("{pre}.ln3"), &format!("{pre}.ffn"));
        }
        oracle::layer_norm(&h, self.p("dec.ln.g"), self.p("dec.ln.b"), d)
    }

    /// Encode every segment, concatenate rows query-first, track validity.
    fn encode_bundle(&self, bundle: &ContextBundle) -> (Vec<f64>, Vec<bool>) {
        let mut fused = self.encode_segment(&bundle.query);
        let mut valid = bundle.query.valid_mask();
        for ctx in &bundle.contexts {
            fused.extend(self.encode_segment(ctx));
            valid.extend(ctx.valid_mask());
        }
        (fused, valid)
    }

    /// e(Q): single-query attention pooling over G (returns d' values).
    pub fn dense_embed(&self, g: &[f64], lq: usize) -> Vec<f64> {
        let d = self.cfg.hidden_size;
        let dp = self.cfg.dense_size;
        let keys = matmul(g, self.p("wk_dense"), lq, d, dp);
        let vals = matmul(g, self.p("wv_dense"), lq, d, dp);
        let pool = self.p("pool_query");
        let keys_t = oracle::transpose(&keys, lq, dp);
        let raw = matmul(pool, &keys_t, 1, dp, lq);
        let scale = 1.0 / (dp as f64).sqrt();
        let scores: Vec<f64> = raw.iter().map(|&v| v * scale).collect();
        let probs = oracle::softmax_rows(&scores, lq);
        matmul(&probs, &vals, 1, lq, dp)
    }

    /// Per-position logits through the tied token head (lq x V).
    fn token_logits(&self, g: &[f64], lq: usize) -> Vec<f64> {
        let d = self.cfg.hidden_size;
        let v = self.cfg.vocab_size;
        let tok_t = oracle::transpose(self.p("tok_emb"), v, d);
        matmul(g, &tok_t, lq, d, v)
    }

    /// Full forward: (logits lq x V, dense embedding d').
    pub fn forward(&self, bundle: &ContextBundle) -> (Vec<f64>, Vec<f64>) {
        let (fused, fused_valid) = self.encode_bundle(bundle);
        let lf = fused_valid.len();
        let g = self.decode(&bundle.query, &fused, lf, &fused_valid);
        let lq = bundle.query.len();
        (self.token_logits(&g, lq), self.dense_embed(&g, lq))
    }

    /// Dense embedding only (keyword side of the contrastive term).
    pub fn embed_query(&self, bundle: &ContextBundle) -> Vec<f64> {
        let (fused, fused_valid) = self.encode_bundle(bundle);
        let lf = fused_valid.len();
        let g = self.decode(&bundle.query, &fused, lf, &fused_valid);
        self.dense_embed(&g, bundle.query.len())
    }

    /// (1/|B|) (sum_i L^N_i + lambda * L^D), matching the production graph.
    pub fn combined_loss(&self, batch: &[TrainingPair], lambda: f64) -> f64 {
        let v = self.cfg.vocab_size;
        let dp = self.cfg.dense_size;
        let b = batch.len();
        let mut nlg_sum = 0.0;
        let mut q_embs = Vec::with_capacity(b * dp);
        let mut k_embs = Vec::with_capacity(b * dp);
        for pair in batch {
            let (logits, emb) = self.forward(&pair.bundle);
            let slots = pair.bundle.query.len();
            let targets = nlg_targets(&pair.keyword.ids, slots).expect("refmodel targets");
            nlg_sum += oracle::cross_entropy_gather(&logits, v, &targets);
            q_embs.extend(emb);
            let kb = keyword_bundle(&pair.keyword.ids, &self.cfg).expect("refmodel keyword bundle");
            k_embs.extend(self.embed_query(&kb));
        }
        let sims = oracle::cosine(&q_embs, &k_embs, b, b, dp);
        let diag: Vec<Option<u32>> = (0..b as u32).map(Some).collect();
        let dr = oracle::cross_entropy_gather(&sims, b, &diag);
        (nlg_sum + lambda * dr) / b as f64
    }

    /// Central finite difference of the combined loss w.r.t. one parameter
    /// coordinate, restoring the original value afterwards.
    pub fn fd_coord(
        &mut self,
        tensor: usize,
        coord: usize,
        eps: f64,
        batch: &[TrainingPair],
        lambda: f64,
    ) -> f64 {
        let orig = self.data[tensor][coord];
        self.data[tensor][coord] = orig + eps;
        let fp = self.combined_loss(batch, lambda);
        self.data[tensor][coord] = orig - eps;
        let fm = self.combined_loss(batch, lambda);
        self.data[tensor][coord] = orig;
        (fp - fm) / (2.0 * eps)
    }
}
