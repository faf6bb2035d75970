use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::linalg::{dot, matmul_acc, matmul_nt_acc, matmul_tn_acc};
use crate::numerics::tensor::{ParamSet, Tensor};

const LN_EPS: f32 = 1e-5;
const GELU_C: f32 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f32 = 0.044_715;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Attention masking mode. `KeyPad` carries per-key validity (true = attend).
#[derive(Debug, Clone)]
pub enum AttnMask {
    None,
    KeyPad(Vec<bool>),
    /// Query position i attends keys 0..=i. Diagnostic hook for probing the
    /// bidirectional decoder; requires a square score matrix.
    Causal,
}

/// Recorded operation; inputs are node references, anything else needed by
/// the backward pass is saved on the node as auxiliary activations.
#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    MatMul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    AddRowBias { a: NodeId, bias: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, factor: f32 },
    SoftmaxRows { a: NodeId },
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId },
    Gelu { x: NodeId },
    Embed { table: NodeId, ids: Vec<u32> },
    ConcatRows { parts: Vec<NodeId> },
    SliceRows { x: NodeId, start: usize, len: usize },
    Transpose { x: NodeId },
    Reshape { x: NodeId },
    CrossEntropyGather { logits: NodeId, targets: Vec<Option<u32>> },
    Cosine { a: NodeId, b: NodeId },
    Attention { q: NodeId, k: NodeId, v: NodeId, heads: usize, mask: AttnMask },
    SumAll { x: NodeId },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    /// Owned output values; empty for parameter nodes (resolved via ParamSet).
    data: Vec<f32>,
    /// Parameter index when this node mirrors a ParamSet entry.
    param: Option<usize>,
    needs_grad: bool,
    /// Saved activations for backward (softmax probs, norms, ...).
    aux: Vec<f32>,
}

/// Gradients produced by one backward pass.
pub struct Gradients {
    node_grads: Vec<Option<Vec<f32>>>,
    /// Parameter-index -> accumulated gradient, aligned with the ParamSet.
    param_grads: Vec<Option<Vec<f32>>>,
}

impl Gradients {
    /// Gradient w.r.t. a node, if it participated in the loss.
    pub fn wrt(&self, id: NodeId) -> Option<&[f32]> {
        self.node_grads
            .get(id.0)
            .and_then(|g| g.as_deref())
    }

    pub fn param(&self, idx: usize) -> Option<&[f32]> {
        self.param_grads.get(idx).and_then(|g| g.as_deref())
    }

    /// Consume, yielding per-parameter gradients for the whole ParamSet.
    pub fn into_param_grads(self) -> Vec<Option<Vec<f32>>> {
        self.param_grads
    }
}

fn empty_params() -> &'static ParamSet {
    static EMPTY: OnceLock<ParamSet> = OnceLock::new();
    EMPTY.get_or_init(ParamSet::new)
}

/// Compute graph over borrowed read-only parameters. Nodes are created in
/// topological order; backward visits them in reverse exactly once.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
    flops: u64,
}

impl Tape<'static> {
    /// Tape with no attached parameters (leaves only).
    pub fn new() -> Self {
        Tape::over(empty_params())
    }
}

impl Default for Tape<'static> {
    fn default() -> Self {
        Tape::new()
    }
}

impl<'p> Tape<'p> {
    pub fn over(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            flops: 0,
        }
    }

    /// FLOPs recorded by all forward ops so far.
    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn reset_flops(&mut self) {
        self.flops = 0;
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Output values of a node.
    pub fn value(&self, id: NodeId) -> &[f32] {
        let n = &self.nodes[id.0];
        match n.param {
            Some(p) => &self.params.get(p).data,
            None => &n.data,
        }
    }

    pub fn to_tensor(&self, id: NodeId) -> Tensor {
        Tensor {
            shape: self.shape(id).to_vec(),
            data: self.value(id).to_vec(),
            grad: None,
            requires_grad: self.nodes[id.0].needs_grad,
        }
    }

    fn rows(&self, id: NodeId) -> usize {
        self.nodes[id.0].shape[0]
    }

    fn cols(&self, id: NodeId) -> usize {
        *self.nodes[id.0].shape.last().expect("rank >= 1")
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, data: Vec<f32>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            shape,
            data,
            param: None,
            needs_grad,
            aux: Vec::new(),
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push_aux(
        &mut self,
        op: Op,
        shape: Vec<usize>,
        data: Vec<f32>,
        needs_grad: bool,
        aux: Vec<f32>,
    ) -> NodeId {
        let id = self.push(op, shape, data, needs_grad);
        self.nodes[id.0].aux = aux;
        id
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn dim_err(&self, op: &'static str, a: NodeId, b: NodeId) -> Error {
        Error::Dimension {
            op,
            lhs: self.shape(a).to_vec(),
            rhs: self.shape(b).to_vec(),
        }
    }

    // ---- leaves ------------------------------------------------------

    /// Owned leaf; tracks gradients iff `tensor.requires_grad`.
    pub fn leaf(&mut self, tensor: Tensor) -> NodeId {
        let needs = tensor.requires_grad;
        self.push(Op::Leaf, tensor.shape, tensor.data, needs)
    }

    /// Constant leaf (no gradient).
    pub fn constant(&mut self, tensor: Tensor) -> NodeId {
        self.push(Op::Leaf, tensor.shape, tensor.data, false)
    }

    /// Node view of a parameter; memoized so each parameter has one node.
    pub fn param(&mut self, idx: usize) -> NodeId {
        if let Some(id) = self.param_nodes[idx] {
            return id;
        }
        let t = self.params.get(idx);
        let shape = t.shape.clone();
        let needs = t.requires_grad;
        let id = self.push(Op::Leaf, shape, Vec::new(), needs);
        self.nodes[id.0].param = Some(idx);
        self.param_nodes[idx] = Some(id);
        id
    }

    // ---- ops ---------------------------------------------------------

    /// Standard matrix product `a (m x k) * b (k x n)`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a).len() != 2 || self.shape(b).len() != 2 || self.cols(a) != self.rows(b) {
            return Err(self.dim_err("matmul", a, b));
        }
        let (m, k, n) = (self.rows(a), self.cols(a), self.cols(b));
        let mut out = vec![0.0; m * n];
        matmul_acc(&mut out, self.value(a), self.value(b), m, k, n);
        self.flops += 2 * (m * k * n) as u64;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul { a, b }, vec![m, n], out, needs))
    }

    /// Elementwise sum of same-shape tensors.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(self.dim_err("add", a, b));
        }
        let out: Vec<f32> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        self.flops += out.len() as u64;
        let needs = self.needs(a) || self.needs(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Add { a, b }, shape, out, needs))
    }

    /// `a (m x n) + bias (n)` broadcast over rows.
    pub fn add_row_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        if self.shape(a).len() != 2 || self.shape(bias) != [self.cols(a)] {
            return Err(self.dim_err("add_row_bias", a, bias));
        }
        let n = self.cols(a);
        let bv = self.value(bias);
        let out: Vec<f32> = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + bv[i % n])
            .collect();
        self.flops += out.len() as u64;
        let needs = self.needs(a) || self.needs(bias);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::AddRowBias { a, bias }, shape, out, needs))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(self.dim_err("mul", a, b));
        }
        let out: Vec<f32> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        self.flops += out.len() as u64;
        let needs = self.needs(a) || self.needs(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Mul { a, b }, shape, out, needs))
    }

    pub fn scale(&mut self, a: NodeId, factor: f32) -> NodeId {
        let out: Vec<f32> = self.value(a).iter().map(|x| x * factor).collect();
        self.flops += out.len() as u64;
        let needs = self.needs(a);
        let shape = self.shape(a).to_vec();
        self.push(Op::Scale { a, factor }, shape, out, needs)
    }

    /// Row-wise softmax with per-row max subtraction.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("softmax_rows: non-finite input".into()));
        }
        let n = self.cols(a);
        let m = self.value(a).len() / n;
        let mut out = vec![0.0f32; m * n];
        for i in 0..m {
            let row = &self.value(a)[i * n..(i + 1) * n];
            softmax_into(row, &mut out[i * n..(i + 1) * n]);
        }
        self.flops += 5 * (m * n) as u64;
        let needs = self.needs(a);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::SoftmaxRows { a }, shape, out, needs))
    }

    /// Row-wise layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId> {
        let n = self.cols(x);
        if self.shape(gain) != [n] || self.shape(bias) != [n] {
            return Err(self.dim_err("layer_norm", x, gain));
        }
        let m = self.value(x).len() / n;
        let mut out = vec![0.0f32; m * n];
        // aux layout: m*n normalized values followed by m inverse stds
        let mut aux = vec![0.0f32; m * n + m];
        {
            let (gv, bv) = (self.value(gain), self.value(bias));
            let xv = self.value(x);
            for i in 0..m {
                let row = &xv[i * n..(i + 1) * n];
                let mean = row.iter().sum::<f32>() / n as f32;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n as f32;
                let inv_std = 1.0 / (var + LN_EPS).sqrt();
                aux[m * n + i] = inv_std;
                for j in 0..n {
                    let xh = (row[j] - mean) * inv_std;
                    aux[i * n + j] = xh;
                    out[i * n + j] = xh * gv[j] + bv[j];
                }
            }
        }
        self.flops += 8 * (m * n) as u64;
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        let shape = self.shape(x).to_vec();
        Ok(self.push_aux(Op::LayerNorm { x, gain, bias }, shape, out, needs, aux))
    }

    /// Tanh-approximation GELU.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f32> = self.value(x).iter().map(|&v| gelu_fwd(v)).collect();
        self.flops += 10 * out.len() as u64;
        let needs = self.needs(x);
        let shape = self.shape(x).to_vec();
        self.push(Op::Gelu { x }, shape, out, needs)
    }

    /// Gather rows of an embedding table by token id.
    pub fn embed(&mut self, table: NodeId, ids: &[u32]) -> Result<NodeId> {
        let vocab = self.rows(table);
        let d = self.cols(table);
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= vocab) {
            return Err(Error::Vocab { id: bad, vocab });
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            out.extend_from_slice(&tv[id as usize * d..(id as usize + 1) * d]);
        }
        let needs = self.needs(table);
        Ok(self.push(
            Op::Embed { table, ids: ids.to_vec() },
            vec![ids.len(), d],
            out,
            needs,
        ))
    }

    /// Row-wise concatenation, first part first.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_rows: empty part list".into()));
        }
        let n = self.cols(parts[0]);
        let mut rows = 0;
        for &p in parts {
            if self.cols(p) != n {
                return Err(self.dim_err("concat_rows", parts[0], p));
            }
            rows += self.rows(p);
        }
        let mut out = Vec::with_capacity(rows * n);
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Op::ConcatRows { parts: parts.to_vec() },
            vec![rows, n],
            out,
            needs,
        ))
    }

    /// Contiguous row slice `[start, start+len)`.
    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (m, n) = (self.rows(x), self.cols(x));
        if start + len > m {
            return Err(Error::Contract(format!(
                "slice_rows: [{start}, {}) out of {m} rows",
                start + len
            )));
        }
        let out = self.value(x)[start * n..(start + len) * n].to_vec();
        let needs = self.needs(x);
        Ok(self.push(Op::SliceRows { x, start, len }, vec![len, n], out, needs))
    }

    /// Materialized 2-D transpose.
    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        if self.shape(x).len() != 2 {
            return Err(Error::Contract(format!(
                "transpose: rank-2 required, got {:?}",
                self.shape(x)
            )));
        }
        let (m, n) = (self.rows(x), self.cols(x));
        let xv = self.value(x);
        let mut out = vec![0.0f32; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = xv[i * n + j];
            }
        }
        let needs = self.needs(x);
        Ok(self.push(Op::Transpose { x }, vec![n, m], out, needs))
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).len() {
            return Err(Error::Contract(format!(
                "reshape: {:?} -> {:?} changes element count",
                self.shape(x),
                shape
            )));
        }
        let out = self.value(x).to_vec();
        let needs = self.needs(x);
        Ok(self.push(Op::Reshape { x }, shape, out, needs))
    }

    /// Summed negative log-likelihood of per-row targets under row-softmax
    /// of `logits`; `None` targets are excluded. Returns a scalar.
    pub fn cross_entropy_gather(
        &mut self,
        logits: NodeId,
        targets: &[Option<u32>],
    ) -> Result<NodeId> {
        let (m, v) = (self.rows(logits), self.cols(logits));
        if targets.len() != m {
            return Err(Error::Contract(format!(
                "cross_entropy_gather: {m} rows vs {} targets",
                targets.len()
            )));
        }
        if let Some(&t) = targets.iter().flatten().find(|&&t| t as usize >= v) {
            return Err(Error::Vocab { id: t, vocab: v });
        }
        let mut probs = vec![0.0f32; m * v];
        let mut loss = 0.0f64;
        {
            let lv = self.value(logits);
            for i in 0..m {
                let row = &lv[i * v..(i + 1) * v];
                softmax_into(row, &mut probs[i * v..(i + 1) * v]);
                if let Some(t) = targets[i] {
                    loss -= (probs[i * v + t as usize].max(f32::MIN_POSITIVE) as f64).ln();
                }
            }
        }
        self.flops += 6 * (m * v) as u64;
        let needs = self.needs(logits);
        Ok(self.push_aux(
            Op::CrossEntropyGather { logits, targets: targets.to_vec() },
            vec![1],
            vec![loss as f32],
            needs,
            probs,
        ))
    }

    /// All-pairs cosine similarity between rows of `a (m x d)` and
    /// `b (n x d)`. Norms are clamped at 1e-8; an exactly zero row errors.
    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.cols(a) != self.cols(b) {
            return Err(self.dim_err("cosine", a, b));
        }
        let d = self.cols(a);
        let (m, n) = (self.rows(a), self.rows(b));
        let (av, bv) = (self.value(a), self.value(b));
        let mut norms = vec![0.0f32; m + n];
        for i in 0..m {
            let nv = dot(&av[i * d..(i + 1) * d], &av[i * d..(i + 1) * d]).sqrt();
            if nv == 0.0 {
                return Err(Error::Numeric(format!("cosine: zero-norm row {i} in lhs")));
            }
            norms[i] = nv.max(1e-8);
        }
        for j in 0..n {
            let nv = dot(&bv[j * d..(j + 1) * d], &bv[j * d..(j + 1) * d]).sqrt();
            if nv == 0.0 {
                return Err(Error::Numeric(format!("cosine: zero-norm row {j} in rhs")));
            }
            norms[m + j] = nv.max(1e-8);
        }
        let mut out = vec![0.0f32; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = dot(&av[i * d..(i + 1) * d], &bv[j * d..(j + 1) * d])
                    / (norms[i] * norms[m + j]);
            }
        }
        self.flops += (2 * m * n * d + 2 * (m + n) * d) as u64;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push_aux(Op::Cosine { a, b }, vec![m, n], out, needs, norms))
    }

    /// Multi-head scaled dot-product attention over already-projected
    /// queries, keys and values; scale is `1/sqrt(d/heads)`. Mask positions
    /// are excluded before the softmax.
    pub fn attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        mask: AttnMask,
    ) -> Result<NodeId> {
        let d = self.cols(q);
        if self.cols(k) != d || self.cols(v) != d {
            return Err(self.dim_err("attention", q, k));
        }
        if self.rows(k) != self.rows(v) {
            return Err(self.dim_err("attention", k, v));
        }
        if heads == 0 || d % heads != 0 {
            return Err(Error::Contract(format!(
                "attention: head count {heads} must divide model dim {d}"
            )));
        }
        let (lq, lk) = (self.rows(q), self.rows(k));
        match &mask {
            AttnMask::KeyPad(valid) => {
                if valid.len() != lk {
                    return Err(Error::Dimension {
                        op: "attention mask",
                        lhs: vec![valid.len()],
                        rhs: vec![lk],
                    });
                }
                if valid.iter().all(|&x| !x) {
                    return Err(Error::Numeric(
                        "attention: all key positions masked".into(),
                    ));
                }
            }
            AttnMask::Causal => {
                if lq != lk {
                    return Err(Error::Dimension {
                        op: "attention causal mask",
                        lhs: vec![lq],
                        rhs: vec![lk],
                    });
                }
            }
            AttnMask::None => {}
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let mut out = vec![0.0f32; lq * d];
        let mut probs = vec![0.0f32; heads * lq * lk];
        {
            let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
            let mut scores = vec![0.0f32; lk];
            for h in 0..heads {
                let off = h * dh;
                for i in 0..lq {
                    let qrow = &qv[i * d + off..i * d + off + dh];
                    let limit = match mask {
                        AttnMask::Causal => i + 1,
                        _ => lk,
                    };
                    let mut max = f32::NEG_INFINITY;
                    for j in 0..limit {
                        let valid = match &mask {
                            AttnMask::KeyPad(valid) => valid[j],
                            _ => true,
                        };
                        if valid {
                            let s = scale * dot(qrow, &kv[j * d + off..j * d + off + dh]);
                            scores[j] = s;
                            max = max.max(s);
                        } else {
                            scores[j] = f32::NEG_INFINITY;
                        }
                    }
                    let prow = &mut probs[(h * lq + i) * lk..(h * lq + i + 1) * lk];
                    let mut denom = 0.0f32;
                    for j in 0..limit {
                        if scores[j] > f32::NEG_INFINITY {
                            let e = (scores[j] - max).exp();
                            prow[j] = e;
                            denom += e;
                        }
                    }
                    let orow = &mut out[i * d + off..i * d + off + dh];
                    for j in 0..limit {
                        if prow[j] > 0.0 {
                            let p = prow[j] / denom;
                            prow[j] = p;
                            for (o, &vx) in orow.iter_mut().zip(&vv[j * d + off..j * d + off + dh])
                            {
                                *o += p * vx;
                            }
                        }
                    }
                }
            }
        }
        self.flops += (4 * lq * lk * d + 5 * heads * lq * lk) as u64;
        let needs = self.needs(q) || self.needs(k) || self.needs(v);
        Ok(self.push_aux(
            Op::Attention { q, k, v, heads, mask },
            vec![lq, d],
            out,
            needs,
            probs,
        ))
    }

    /// Sum of all elements; returns a scalar.
    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f32 = self.value(x).iter().sum();
        self.flops += self.value(x).len() as u64;
        let needs = self.needs(x);
        self.push(Op::SumAll { x }, vec![1], vec![s], needs)
    }

    // ---- backward ----------------------------------------------------

    /// Reverse-mode sweep from a scalar loss. Visits nodes in reverse
    /// topological order exactly once; gradients of leaves that do not
    /// participate in the loss are absent (treated as zero).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            if grads[idx].is_none() || !self.nodes[idx].needs_grad {
                continue;
            }
            let g = grads[idx].take().expect("just checked");
            self.backprop_node(idx, &g, &mut grads);
            // keep the node's own grad available for callers
            grads[idx] = Some(g);
        }

        let mut param_grads: Vec<Option<Vec<f32>>> = vec![None; self.params.len()];
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.param {
                if let Some(g) = &grads[idx] {
                    param_grads[p] = Some(g.clone());
                }
            }
        }
        Ok(Gradients {
            node_grads: grads,
            param_grads,
        })
    }

    fn accum(&self, grads: &mut [Option<Vec<f32>>], id: NodeId, add: impl FnOnce(&mut [f32])) {
        if !self.needs(id) {
            return;
        }
        let numel = self.value(id).len();
        let slot = grads[id.0].get_or_insert_with(|| vec![0.0; numel]);
        add(slot);
    }

    fn backprop_node(&self, idx: usize, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (m, k) = (self.rows(*a), self.cols(*a));
                let n = self.cols(*b);
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accum(grads, *a, |ga| matmul_nt_acc(ga, g, bv, m, n, k));
                self.accum(grads, *b, |gb| matmul_tn_acc(gb, av, g, m, k, n));
            }
            Op::Add { a, b } => {
                self.accum(grads, *a, |ga| {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                });
                self.accum(grads, *b, |gb| {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                });
            }
            Op::AddRowBias { a, bias } => {
                let n = self.cols(*a);
                self.accum(grads, *a, |ga| {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                });
                self.accum(grads, *bias, |gb| {
                    for (i, y) in g.iter().enumerate() {
                        gb[i % n] += y;
                    }
                });
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accum(grads, *a, |ga| {
                    for ((x, y), z) in ga.iter_mut().zip(g).zip(bv) {
                        *x += y * z;
                    }
                });
                self.accum(grads, *b, |gb| {
                    for ((x, y), z) in gb.iter_mut().zip(g).zip(av) {
                        *x += y * z;
                    }
                });
            }
            Op::Scale { a, factor } => {
                let f = *factor;
                self.accum(grads, *a, |ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += f * y;
                    }
                });
            }
            Op::SoftmaxRows { a } => {
                let n = *node.shape.last().expect("rank >= 1");
                let y = &node.data;
                self.accum(grads, *a, |ga| {
                    for i in 0..y.len() / n {
                        let yr = &y[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let s: f32 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            ga[i * n + j] += yr[j] * (gr[j] - s);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias } => {
                let n = *node.shape.last().expect("rank >= 1");
                let m = node.data.len() / n;
                let xhat = &node.aux[..m * n];
                let inv_std = &node.aux[m * n..];
                let gv = self.value(*gain);
                self.accum(grads, *gain, |gg| {
                    for i in 0..m {
                        for j in 0..n {
                            gg[j] += g[i * n + j] * xhat[i * n + j];
                        }
                    }
                });
                self.accum(grads, *bias, |gb| {
                    for i in 0..m {
                        for j in 0..n {
                            gb[j] += g[i * n + j];
                        }
                    }
                });
                self.accum(grads, *x, |gx| {
                    for i in 0..m {
                        let xr = &xhat[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let mut mean_dxh = 0.0f32;
                        let mut mean_dxh_xh = 0.0f32;
                        for j in 0..n {
                            let dxh = gr[j] * gv[j];
                            mean_dxh += dxh;
                            mean_dxh_xh += dxh * xr[j];
                        }
                        mean_dxh /= n as f32;
                        mean_dxh_xh /= n as f32;
                        for j in 0..n {
                            let dxh = gr[j] * gv[j];
                            gx[i * n + j] += inv_std[i] * (dxh - mean_dxh - xr[j] * mean_dxh_xh);
                        }
                    }
                });
            }
            Op::Gelu { x } => {
                let xv = self.value(*x);
                self.accum(grads, *x, |gx| {
                    for ((o, &gi), &xi) in gx.iter_mut().zip(g).zip(xv) {
                        *o += gi * gelu_bwd(xi);
                    }
                });
            }
            Op::Embed { table, ids } => {
                let d = self.cols(*table);
                self.accum(grads, *table, |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        let dst = &mut gt[id as usize * d..(id as usize + 1) * d];
                        for (o, &gi) in dst.iter_mut().zip(&g[r * d..(r + 1) * d]) {
                            *o += gi;
                        }
                    }
                });
            }
            Op::ConcatRows { parts } => {
                let n = *node.shape.last().expect("rank >= 1");
                let mut offset = 0;
                for &p in parts {
                    let rows = self.rows(p);
                    let seg = &g[offset * n..(offset + rows) * n];
                    self.accum(grads, p, |gp| {
                        for (o, &gi) in gp.iter_mut().zip(seg) {
                            *o += gi;
                        }
                    });
                    offset += rows;
                }
            }
            Op::SliceRows { x, start, len } => {
                let n = self.cols(*x);
                let (s, l) = (*start, *len);
                self.accum(grads, *x, |gx| {
                    for (o, &gi) in gx[s * n..(s + l) * n].iter_mut().zip(g) {
                        *o += gi;
                    }
                });
            }
            Op::Transpose { x } => {
                // node is n x m, x is m x n
                let (n, m) = (node.shape[0], node.shape[1]);
                self.accum(grads, *x, |gx| {
                    for j in 0..n {
                        for i in 0..m {
                            gx[i * n + j] += g[j * m + i];
                        }
                    }
                });
            }
            Op::Reshape { x } => {
                self.accum(grads, *x, |gx| {
                    for (o, &gi) in gx.iter_mut().zip(g) {
                        *o += gi;
                    }
                });
            }
            Op::CrossEntropyGather { logits, targets } => {
                let v = self.cols(*logits);
                let probs = &node.aux;
                let g0 = g[0];
                self.accum(grads, *logits, |gl| {
                    for (i, t) in targets.iter().enumerate() {
                        if let Some(t) = t {
                            let row = &probs[i * v..(i + 1) * v];
                            let dst = &mut gl[i * v..(i + 1) * v];
                            for (o, &p) in dst.iter_mut().zip(row) {
                                *o += g0 * p;
                            }
                            dst[*t as usize] -= g0;
                        }
                    }
                });
            }
            Op::Cosine { a, b } => {
                let d = self.cols(*a);
                let (m, n) = (node.shape[0], node.shape[1]);
                let (av, bv) = (self.value(*a), self.value(*b));
                let s = &node.data;
                let na = &node.aux[..m];
                let nb = &node.aux[m..];
                self.accum(grads, *a, |ga| {
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            if gij == 0.0 {
                                continue;
                            }
                            let denom = na[i] * nb[j];
                            let sij = s[i * n + j];
                            for t in 0..d {
                                ga[i * d + t] += gij
                                    * (bv[j * d + t] / denom
                                        - sij * av[i * d + t] / (na[i] * na[i]));
                            }
                        }
                    }
                });
                self.accum(grads, *b, |gb| {
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            if gij == 0.0 {
                                continue;
                            }
                            let denom = na[i] * nb[j];
                            let sij = s[i * n + j];
                            for t in 0..d {
                                gb[j * d + t] += gij
                                    * (av[i * d + t] / denom
                                        - sij * bv[j * d + t] / (nb[j] * nb[j]));
                            }
                        }
                    }
                });
            }
            Op::Attention { q, k, v, heads, .. } => {
                let d = self.cols(*q);
                let (lq, lk) = (self.rows(*q), self.rows(*k));
                let dh = d / heads;
                let scale = 1.0 / (dh as f32).sqrt();
                let probs = &node.aux;
                let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                // dP and dS are computed head-by-head into scratch rows.
                let mut ds = vec![0.0f32; lk];
                let mut gq = vec![0.0f32; lq * d];
                let mut gk = vec![0.0f32; lk * d];
                let mut gv = vec![0.0f32; lk * d];
                for h in 0..*heads {
                    let off = h * dh;
                    for i in 0..lq {
                        let prow = &probs[(h * lq + i) * lk..(h * lq + i + 1) * lk];
                        let grow = &g[i * d + off..i * d + off + dh];
                        // dP_ij = g_i . v_j ; dV_j += p_ij g_i
                        let mut dp_dot_p = 0.0f32;
                        for j in 0..lk {
                            let p = prow[j];
                            if p == 0.0 {
                                ds[j] = 0.0;
                                continue;
                            }
                            let vrow = &vv[j * d + off..j * d + off + dh];
                            let dp = dot(grow, vrow);
                            ds[j] = dp;
                            dp_dot_p += dp * p;
                            for (o, &gi) in gv[j * d + off..j * d + off + dh]
                                .iter_mut()
                                .zip(grow)
                            {
                                *o += p * gi;
                            }
                        }
                        // softmax backward then score backward
                        for j in 0..lk {
                            let p = prow[j];
                            if p == 0.0 {
                                continue;
                            }
                            let dsij = p * (ds[j] - dp_dot_p) * scale;
                            let krow = &kv[j * d + off..j * d + off + dh];
                            let qrow = &qv[i * d + off..i * d + off + dh];
                            for t in 0..dh {
                                gq[i * d + off + t] += dsij * krow[t];
                                gk[j * d + off + t] += dsij * qrow[t];
                            }
                        }
                    }
                }
                self.accum(grads, *q, |go| {
                    go.iter_mut().zip(&gq).for_each(|(o, &x)| *o += x)
                });
                self.accum(grads, *k, |go| {
                    go.iter_mut().zip(&gk).for_each(|(o, &x)| *o += x)
                });
                self.accum(grads, *v, |go| {
                    go.iter_mut().zip(&gv).for_each(|(o, &x)| *o += x)
                });
            }
            Op::SumAll { x } => {
                let g0 = g[0];
                self.accum(grads, *x, |gx| {
                    for o in gx.iter_mut() {
                        *o += g0;
                    }
                });
            }
        }
    }
}

fn softmax_into(row: &[f32], out: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut denom = 0.0f32;
    for (o, &x) in out.iter_mut().zip(row) {
        let e = (x - max).exp();
        *o = e;
        denom += e;
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
}

fn gelu_fwd(x: f32) -> f32 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_bwd(x: f32) -> f32 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}
