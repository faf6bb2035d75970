use crate::error::{Error, Result};
use crate::model::config::{ModelConfig, MAX_RANKS};
use crate::model::segments::{ContextBundle, EncodedStates, TokenSegment};
use crate::numerics::{AttnMask, NodeId, ParamSet, Tape, Tensor};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
struct AttnIdx {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
}

#[derive(Debug, Clone, Copy)]
struct FfnIdx {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
struct EncBlockIdx {
    ln1: (usize, usize),
    attn: AttnIdx,
    ln2: (usize, usize),
    ffn: FfnIdx,
}

#[derive(Debug, Clone, Copy)]
struct DecBlockIdx {
    ln1: (usize, usize),
    self_attn: AttnIdx,
    ln2: (usize, usize),
    cross_attn: AttnIdx,
    ln3: (usize, usize),
    ffn: FfnIdx,
}

/// Parameter indices into the ParamSet, in declaration (= checkpoint) order.
#[derive(Debug, Clone)]
struct Layout {
    tok_emb: usize,
    pos_emb: usize,
    kind_emb: usize,
    rank_emb: usize,
    enc: Vec<EncBlockIdx>,
    enc_ln: (usize, usize),
    dec: Vec<DecBlockIdx>,
    dec_ln: (usize, usize),
    wk_dense: usize,
    wv_dense: usize,
    pool_query: usize,
}

/// Forward-pass handles for one bundle.
pub struct ForwardOut {
    /// e(Q): 1 x d' dense embedding.
    pub embedding: NodeId,
    /// Per-position vocabulary logits, l^0 x V.
    pub logits: NodeId,
    /// Decoder states G, l^0 x d.
    pub decoder_states: NodeId,
    pub fused_rows: usize,
}

/// Shared encoder + bidirectional NAR decoder with a dense pooling head and
/// a token head tied to the embedding table.
pub struct UnityModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    layout: Layout,
}

impl UnityModel {
    /// Fresh model with N(0, 0.02) weight init; layer-norm gains start at 1,
    /// biases and the rank embedding at 0 (unseen ranks then contribute
    /// nothing at inference time).
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed).derive("model-init");
        let mut params = ParamSet::new();
        let d = config.hidden_size;
        let dp = config.dense_size;
        let v = config.vocab_size;
        let f = config.ffn_size;
        let p = config.max_len.longest();

        let gauss = |shape: Vec<usize>, rng: &mut Rng| -> Tensor {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| 0.02 * rng.next_gauss()).collect();
            Tensor::new(shape, data).expect("shape/data agreement")
        };
        let ones = |n: usize| Tensor::new(vec![n], vec![1.0; n]).expect("ones");

        let tok_emb = params.push("tok_emb", gauss(vec![v, d], &mut rng));
        let pos_emb = params.push("pos_emb", gauss(vec![p, d], &mut rng));
        let kind_emb = params.push("kind_emb", gauss(vec![5, d], &mut rng));
        let rank_emb = params.push("rank_emb", Tensor::zeros(vec![MAX_RANKS, d]));

        let attn = |prefix: &str, params: &mut ParamSet, rng: &mut Rng| AttnIdx {
            wq: params.push(format!("{prefix}.wq"), gauss(vec![d, d], rng)),
            wk: params.push(format!("{prefix}.wk"), gauss(vec![d, d], rng)),
            wv: params.push(format!("{prefix}.wv"), gauss(vec![d, d], rng)),
            wo: params.push(format!("{prefix}.wo"), gauss(vec![d, d], rng)),
        };
        let ffn = |prefix: &str, params: &mut ParamSet, rng: &mut Rng| FfnIdx {
            w1: params.push(format!("{prefix}.w1"), gauss(vec![d, f], rng)),
            b1: params.push(format!("{prefix}.b1"), Tensor::zeros(vec![f])),
            w2: params.push(format!("{prefix}.w2"), gauss(vec![f, d], rng)),
            b2: params.push(format!("{prefix}.b2"), Tensor::zeros(vec![d])),
        };
        let ln = |prefix: &str, params: &mut ParamSet| {
            (
                params.push(format!("{prefix}.g"), ones(d)),
                params.push(format!("{prefix}.b"), Tensor::zeros(vec![d])),
            )
        };

        let mut enc = Vec::with_capacity(config.num_encoder_layers);
        for i in 0..config.num_encoder_layers {
            enc.push(EncBlockIdx {
                ln1: ln(&format!("enc{i}.ln1"), &mut params),
                attn: attn(&format!("enc{i}.attn"), &mut params, &mut rng),
                ln2: ln(&format!("enc{i}.ln2"), &mut params),
                ffn: ffn(&format!("enc{i}.ffn"), &mut params, &mut rng),
            });
        }
        let enc_ln = ln("enc.ln", &mut params);

        let mut dec = Vec::with_capacity(config.num_decoder_layers);
        for i in 0..config.num_decoder_layers {
            dec.push(DecBlockIdx {
                ln1: ln(&format!("dec{i}.ln1"), &mut params),
                self_attn: attn(&format!("dec{i}.self"), &mut params, &mut rng),
                ln2: ln(&format!("dec{i}.ln2"), &mut params),
                cross_attn: attn(&format!("dec{i}.cross"), &mut params, &mut rng),
                ln3: ln(&format!("dec{i}.ln3"), &mut params),
                ffn: ffn(&format!("dec{i}.ffn"), &mut params, &mut rng),
            });
        }
        let dec_ln = ln("dec.ln", &mut params);

        let wk_dense = params.push("wk_dense", gauss(vec![d, dp], &mut rng));
        let wv_dense = params.push("wv_dense", gauss(vec![d, dp], &mut rng));
        let pool_query = params.push("pool_query", gauss(vec![dp], &mut rng));

        Ok(UnityModel {
            config,
            params,
            layout: Layout {
                tok_emb,
                pos_emb,
                kind_emb,
                rank_emb,
                enc,
                enc_ln,
                dec,
                dec_ln,
                wk_dense,
                wv_dense,
                pool_query,
            },
        })
    }

    /// Rebuild from a ParamSet with the exact declaration layout (loader).
    pub(crate) fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        let fresh = UnityModel::new(config.clone(), 0)?;
        if fresh.params.len() != params.len() {
            return Err(Error::Contract(format!(
                "parameter count mismatch: {} vs {}",
                fresh.params.len(),
                params.len()
            )));
        }
        for i in 0..params.len() {
            if fresh.params.get(i).shape != params.get(i).shape
                || fresh.params.name(i) != params.name(i)
            {
                return Err(Error::Contract(format!(
                    "parameter {i} ({}) has unexpected shape",
                    params.name(i)
                )));
            }
        }
        Ok(UnityModel {
            config,
            params,
            layout: fresh.layout,
        })
    }

    pub fn tape(&self) -> Tape<'_> {
        Tape::over(&self.params)
    }

    /// Token + position + kind + rank embeddings for one segment.
    fn embed_input(&self, tape: &mut Tape, seg: &TokenSegment) -> Result<NodeId> {
        let l = seg.len();
        let tok_t = tape.param(self.layout.tok_emb);
        let pos_t = tape.param(self.layout.pos_emb);
        let kind_t = tape.param(self.layout.kind_emb);
        let rank_t = tape.param(self.layout.rank_emb);

        let tok = tape.embed(tok_t, &seg.ids)?;
        let positions: Vec<u32> = (0..l as u32).collect();
        let pos = tape.embed(pos_t, &positions)?;
        let kinds = vec![seg.kind.index() as u32; l];
        let kind = tape.embed(kind_t, &kinds)?;
        let rank_row = seg.source_rank.min(MAX_RANKS - 1) as u32;
        let rank = tape.embed(rank_t, &vec![rank_row; l])?;

        let a = tape.add(tok, pos)?;
        let b = tape.add(a, kind)?;
        tape.add(b, rank)
    }

    fn mask_for(valid: &[bool]) -> AttnMask {
        if valid.iter().all(|&v| v) {
            AttnMask::None
        } else {
            AttnMask::KeyPad(valid.to_vec())
        }
    }

    /// One pre-LN self-attention + FFN encoder block.
    fn encoder_block(
        &self,
        tape: &mut Tape,
        x: NodeId,
        blk: &EncBlockIdx,
        mask: &AttnMask,
    ) -> Result<NodeId> {
        let heads = self.config.num_heads;
        let (g1, b1) = (tape.param(blk.ln1.0), tape.param(blk.ln1.1));
        let a = tape.layer_norm(x, g1, b1)?;
        let wq = tape.param(blk.attn.wq);
        let wk = tape.param(blk.attn.wk);
        let wv = tape.param(blk.attn.wv);
        let wo = tape.param(blk.attn.wo);
        let q = tape.matmul(a, wq)?;
        let k = tape.matmul(a, wk)?;
        let v = tape.matmul(a, wv)?;
        let att = tape.attention(q, k, v, heads, mask.clone())?;
        let proj = tape.matmul(att, wo)?;
        let h = tape.add(x, proj)?;
        self.ffn_block(tape, h, blk.ln2, &blk.ffn)
    }

    fn ffn_block(
        &self,
        tape: &mut Tape,
        x: NodeId,
        ln: (usize, usize),
        ffn: &FfnIdx,
    ) -> Result<NodeId> {
        let (g, b) = (tape.param(ln.0), tape.param(ln.1));
        let a = tape.layer_norm(x, g, b)?;
        let w1 = tape.param(ffn.w1);
        let b1 = tape.param(ffn.b1);
        let w2 = tape.param(ffn.w2);
        let b2 = tape.param(ffn.b2);
        let h1 = tape.matmul(a, w1)?;
        let h1b = tape.add_row_bias(h1, b1)?;
        let act = tape.gelu(h1b);
        let h2 = tape.matmul(act, w2)?;
        let h2b = tape.add_row_bias(h2, b2)?;
        tape.add(x, h2b)
    }

    /// Encode one segment independently of all others: H^i = enc(C^i).
    pub fn encode_segment(&self, tape: &mut Tape, seg: &TokenSegment) -> Result<NodeId> {
        if seg.is_empty() {
            return Err(Error::Contract("encode_segment: empty segment".into()));
        }
        let valid = seg.valid_mask();
        let mask = Self::mask_for(&valid);
        let mut h = self.embed_input(tape, seg)?;
        for blk in &self.layout.enc.clone() {
            h = self.encoder_block(tape, h, blk, &mask)?;
        }
        let (g, b) = (tape.param(self.layout.enc_ln.0), tape.param(self.layout.enc_ln.1));
        tape.layer_norm(h, g, b)
    }

    /// Row-wise concatenation of per-segment states; query states first.
    pub fn fuse(&self, tape: &mut Tape, states: &[NodeId]) -> Result<NodeId> {
        if states.is_empty() {
            return Err(Error::Contract("fuse: empty state list".into()));
        }
        tape.concat_rows(states)
    }

    /// Bidirectional NAR decoder over the query positions, cross-attending
    /// over fused states. `fused_valid` marks fused rows usable as keys.
    /// `causal_probe` forces a causal self-attention mask (diagnostics only).
    pub fn decode(
        &self,
        tape: &mut Tape,
        query: &TokenSegment,
        fused: NodeId,
        fused_valid: &[bool],
        causal_probe: bool,
    ) -> Result<NodeId> {
        if query.is_empty() {
            return Err(Error::Contract("decode: empty query".into()));
        }
        let heads = self.config.num_heads;
        let self_mask = if causal_probe {
            AttnMask::Causal
        } else {
            Self::mask_for(&query.valid_mask())
        };
        let cross_mask = Self::mask_for(fused_valid);
        let mut h = self.embed_input(tape, query)?;
        for blk in &self.layout.dec.clone() {
            // self-attention
            let (g1, b1) = (tape.param(blk.ln1.0), tape.param(blk.ln1.1));
            let a = tape.layer_norm(h, g1, b1)?;
            let wq = tape.param(blk.self_attn.wq);
            let wk = tape.param(blk.self_attn.wk);
            let wv = tape.param(blk.self_attn.wv);
            let wo = tape.param(blk.self_attn.wo);
            let q = tape.matmul(a, wq)?;
            let k = tape.matmul(a, wk)?;
            let v = tape.matmul(a, wv)?;
            let att = tape.attention(q, k, v, heads, self_mask.clone())?;
            let proj = tape.matmul(att, wo)?;
            h = tape.add(h, proj)?;
            // cross-attention over fused states
            let (g2, b2) = (tape.param(blk.ln2.0), tape.param(blk.ln2.1));
            let a = tape.layer_norm(h, g2, b2)?;
            let wq = tape.param(blk.cross_attn.wq);
            let wk = tape.param(blk.cross_attn.wk);
            let wv = tape.param(blk.cross_attn.wv);
            let wo = tape.param(blk.cross_attn.wo);
            let q = tape.matmul(a, wq)?;
            let k = tape.matmul(fused, wk)?;
            let v = tape.matmul(fused, wv)?;
            let att = tape.attention(q, k, v, heads, cross_mask.clone())?;
            let proj = tape.matmul(att, wo)?;
            h = tape.add(h, proj)?;
            // feed-forward
            h = self.ffn_block(tape, h, blk.ln3, &blk.ffn)?;
        }
        let (g, b) = (tape.param(self.layout.dec_ln.0), tape.param(self.layout.dec_ln.1));
        tape.layer_norm(h, g, b)
    }

    /// e(Q): single-query attention pooling over G with learned g~, keys
    /// GW^K and values GW^V; scale 1/sqrt(d').
    pub fn dense_embed(&self, tape: &mut Tape, g: NodeId) -> Result<NodeId> {
        let dp = self.config.dense_size;
        let wk = tape.param(self.layout.wk_dense);
        let wv = tape.param(self.layout.wv_dense);
        let pool = tape.param(self.layout.pool_query);
        let keys = tape.matmul(g, wk)?;
        let vals = tape.matmul(g, wv)?;
        let q = tape.reshape(pool, vec![1, dp])?;
        let keys_t = tape.transpose(keys)?;
        let raw = tape.matmul(q, keys_t)?;
        let scores = tape.scale(raw, 1.0 / (dp as f32).sqrt());
        let probs = tape.softmax_rows(scores)?;
        tape.matmul(probs, vals)
    }

    /// Per-position vocabulary logits; the output head is tied to the token
    /// embedding table (logits = G tok_emb^T).
    pub fn token_logits(&self, tape: &mut Tape, g: NodeId) -> Result<NodeId> {
        let tok = tape.param(self.layout.tok_emb);
        let tok_t = tape.transpose(tok)?;
        tape.matmul(g, tok_t)
    }

    /// Encode every segment, fuse, decode, and apply both heads.
    pub fn forward(&self, tape: &mut Tape, bundle: &ContextBundle) -> Result<ForwardOut> {
        let (fused, fused_valid) = self.encode_bundle(tape, bundle)?;
        let g = self.decode(tape, &bundle.query, fused, &fused_valid, false)?;
        let embedding = self.dense_embed(tape, g)?;
        let logits = self.token_logits(tape, g)?;
        Ok(ForwardOut {
            embedding,
            logits,
            decoder_states: g,
            fused_rows: fused_valid.len(),
        })
    }

    /// Dense embedding only (skips the token head).
    pub fn embed_query(&self, tape: &mut Tape, bundle: &ContextBundle) -> Result<NodeId> {
        let (fused, fused_valid) = self.encode_bundle(tape, bundle)?;
        let g = self.decode(tape, &bundle.query, fused, &fused_valid, false)?;
        self.dense_embed(tape, g)
    }

    /// Encode all segments independently and concatenate (H~ plus validity).
    pub fn encode_bundle(
        &self,
        tape: &mut Tape,
        bundle: &ContextBundle,
    ) -> Result<(NodeId, Vec<bool>)> {
        let mut states = Vec::with_capacity(1 + bundle.n());
        let mut valid = Vec::new();
        let s = self.encode_segment(tape, &bundle.query)?;
        states.push(s);
        valid.extend(bundle.query.valid_mask());
        for ctx in &bundle.contexts {
            let s = self.encode_segment(tape, ctx)?;
            states.push(s);
            valid.extend(ctx.valid_mask());
        }
        let fused = self.fuse(tape, &states)?;
        Ok((fused, valid))
    }

    /// Materialized per-segment encoder states (test/introspection surface).
    pub fn encoded_states(&self, bundle: &ContextBundle) -> Result<EncodedStates> {
        let mut tape = self.tape();
        let mut per_segment = Vec::with_capacity(1 + bundle.n());
        let q = self.encode_segment(&mut tape, &bundle.query)?;
        per_segment.push(tape.to_tensor(q));
        let mut nodes = vec![q];
        for ctx in &bundle.contexts {
            let s = self.encode_segment(&mut tape, ctx)?;
            per_segment.push(tape.to_tensor(s));
            nodes.push(s);
        }
        let fused = self.fuse(&mut tape, &nodes)?;
        Ok(EncodedStates {
            per_segment,
            fused: tape.to_tensor(fused),
        })
    }

    /// Reference encoder that concatenates all segment embeddings first and
    /// runs joint self-attention over the whole sequence. Quadratic in total
    /// length; exists purely as the scaling baseline for fusion encoding.
    pub fn encode_concat(&self, tape: &mut Tape, bundle: &ContextBundle) -> Result<NodeId> {
        let mut embedded = Vec::with_capacity(1 + bundle.n());
        let mut valid = bundle.query.valid_mask();
        let e = self.embed_input(tape, &bundle.query)?;
        embedded.push(e);
        for ctx in &bundle.contexts {
            let e = self.embed_input(tape, ctx)?;
            embedded.push(e);
            valid.extend(ctx.valid_mask());
        }
        let mut h = tape.concat_rows(&embedded)?;
        let mask = Self::mask_for(&valid);
        for blk in &self.layout.enc.clone() {
            h = self.encoder_block(tape, h, blk, &mask)?;
        }
        let (g, b) = (tape.param(self.layout.enc_ln.0), tape.param(self.layout.enc_ln.1));
        tape.layer_norm(h, g, b)
    }

    /// Zero the cross-attention value projections (ablation hook: decoder
    /// output becomes independent of context contents).
    pub fn zero_cross_values(&mut self) {
        for blk in &self.layout.dec.clone() {
            let t = self.params.get_mut(blk.cross_attn.wv);
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}
