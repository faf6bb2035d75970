//! f64 forward re-implementations of every tape op, written independently
//! of the production kernels (plain index loops, f64 throughout).

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    c
}

pub fn transpose(x: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = x[i * n + j];
        }
    }
    out
}

pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / denom).collect()
}

pub fn softmax_rows(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(n) {
        out.extend(softmax_row(row));
    }
    out
}

pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(n) {
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for j in 0..n {
            out.push((row[j] - mean) * inv * gain[j] + bias[j]);
        }
    }
    out
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn embed(table: &[f64], d: usize, ids: &[u32]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        out.extend_from_slice(&table[id as usize * d..(id as usize + 1) * d]);
    }
    out
}

/// Summed NLL over rows with `Some` targets (log-softmax per row).
pub fn cross_entropy_gather(logits: &[f64], v: usize, targets: &[Option<u32>]) -> f64 {
    let mut loss = 0.0;
    for (row, t) in logits.chunks(v).zip(targets) {
        if let Some(t) = t {
            let p = softmax_row(row);
            loss -= p[*t as usize].ln();
        }
    }
    loss
}

pub fn cosine(a: &[f64], b: &[f64], m: usize, n: usize, d: usize) -> Vec<f64> {
    let norm = |row: &[f64]| -> f64 {
        row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8)
    };
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let ra = &a[i * d..(i + 1) * d];
        for j in 0..n {
            let rb = &b[j * d..(j + 1) * d];
            let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            out[i * n + j] = dot / (norm(ra) * norm(rb));
        }
    }
    out
}

/// Multi-head attention over projected q/k/v; `valid` marks usable keys,
/// `causal` restricts query i to keys 0..=i.
pub fn attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    lq: usize,
    lk: usize,
    d: usize,
    heads: usize,
    valid: Option<&[bool]>,
    causal: bool,
) -> Vec<f64> {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![0.0; lq * d];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..lq {
            let mut scores = Vec::new();
            let mut keys = Vec::new();
            for j in 0..lk {
                if causal && j > i {
                    continue;
                }
                if let Some(valid) = valid {
                    if !valid[j] {
                        continue;
                    }
                }
                let mut s = 0.0;
                for t in 0..dh {
                    s += q[i * d + off + t] * k[j * d + off + t];
                }
                scores.push(s * scale);
                keys.push(j);
            }
            let probs = softmax_row(&scores);
            for (p, &j) in probs.iter().zip(&keys) {
                for t in 0..dh {
                    out[i * d + off + t] += p * v[j * d + off + t];
                }
            }
        }
    }
    out
}

/// Exhaustive cosine top-k by full sort; ties broken by lower id.
pub fn brute_topk(query: &[f64], rows: &[Vec<f64>], k: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, cosine(query, r, 1, 1, query.len())[0]))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}
