use super::{matmul, matmul_tn};
use crate::embedding::softmax;
use crate::error::{Error, Result};

/// Affine map applied to the concatenated heads: `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputProjection {
    pub c: usize,
    /// `c x c`, row-major (input index major).
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl OutputProjection {
    pub fn new(c: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != c * c || bias.len() != c {
            return Err(Error::Shape(format!("output projection for {c} channels has {} + {} values", weight.len(), bias.len())));
        }
        Ok(Self { c, weight, bias })
    }

    pub fn zeros(c: usize) -> Self {
        Self { c, weight: vec![0.0; c * c], bias: vec![0.0; c] }
    }

    pub fn identity(c: usize) -> Self {
        let mut p = Self::zeros(c);
        for i in 0..c {
            p.weight[i * c + i] = 1.0;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhaOutput {
    /// `nq x c`.
    pub out: Vec<f64>,
    /// Concatenated heads before projection, `nq x c`.
    pub heads_out: Vec<f64>,
    /// One `nq x nk` row-stochastic matrix per head.
    pub attention: Vec<Vec<f64>>,
}

fn dims(q: &[f64], k: &[f64], v: &[f64], c: usize, heads: usize) -> Result<(usize, usize, usize)> {
    if heads == 0 || c == 0 || !c.is_multiple_of(heads) {
        return Err(Error::Shape(format!("{c} channels cannot be split into {heads} heads")));
    }
    if !q.len().is_multiple_of(c) || !k.len().is_multiple_of(c) || k.len() != v.len() {
        return Err(Error::Shape(format!(
            "sequences of {}, {} and {} values for {c} channels",
            q.len(),
            k.len(),
            v.len()
        )));
    }
    let (nq, nk) = (q.len() / c, k.len() / c);
    if nq == 0 || nk == 0 {
        return Err(Error::Empty("attention sequence".into()));
    }
    Ok((nq, nk, c / heads))
}

fn head_slice(x: &[f64], n: usize, c: usize, h: usize, dh: usize) -> Vec<f64> {
    (0..n).flat_map(|i| x[i * c + h * dh..i * c + (h + 1) * dh].iter().copied()).collect()
}

/// Scaled dot-product attention over `heads` channel groups of `c`, heads
/// concatenated and passed through `proj`.
pub fn mha(q: &[f64], k: &[f64], v: &[f64], c: usize, heads: usize, proj: &OutputProjection) -> Result<MhaOutput> {
    let (nq, nk, dh) = dims(q, k, v, c, heads)?;
    if proj.c != c {
        return Err(Error::Shape(format!("projection has {} channels, sequences have {c}", proj.c)));
    }
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads_out = vec![0.0; nq * c];
    let mut attention = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = (head_slice(q, nq, c, h, dh), head_slice(k, nk, c, h, dh), head_slice(v, nk, c, h, dh));
        let mut a = Vec::with_capacity(nq * nk);
        for i in 0..nq {
            let scores: Vec<f64> = (0..nk)
                .map(|j| qh[i * dh..(i + 1) * dh].iter().zip(&kh[j * dh..(j + 1) * dh]).map(|(x, y)| x * y).sum::<f64>() * scale)
                .collect();
            a.extend(softmax(&scores));
        }
        let oh = matmul(&a, &vh, nq, nk, dh);
        for i in 0..nq {
            heads_out[i * c + h * dh..i * c + (h + 1) * dh].copy_from_slice(&oh[i * dh..(i + 1) * dh]);
        }
        attention.push(a);
    }
    let mut out = matmul(&heads_out, &proj.weight, nq, c, c);
    for row in out.chunks_mut(c) {
        for (o, b) in row.iter_mut().zip(&proj.bias) {
            *o += b;
        }
    }
    Ok(MhaOutput { out, heads_out, attention })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhaGrads {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Backward pass of [`mha`] given the forward result and `d_out` (`nq x c`).
#[allow(clippy::too_many_arguments)]
pub fn mha_backward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    c: usize,
    heads: usize,
    proj: &OutputProjection,
    fwd: &MhaOutput,
    d_out: &[f64],
) -> Result<MhaGrads> {
    let (nq, nk, dh) = dims(q, k, v, c, heads)?;
    if d_out.len() != nq * c {
        return Err(Error::Shape(format!("output gradient has {} entries, expected {}", d_out.len(), nq * c)));
    }
    let scale = 1.0 / (dh as f64).sqrt();
    let d_weight = matmul_tn(&fwd.heads_out, d_out, nq, c, c);
    let mut d_bias = vec![0.0; c];
    for row in d_out.chunks(c) {
        for (b, g) in d_bias.iter_mut().zip(row) {
            *b += g;
        }
    }
    // d(heads_out) = d_out W^T
    let mut d_heads = vec![0.0; nq * c];
    for i in 0..nq {
        for a in 0..c {
            d_heads[i * c + a] = (0..c).map(|b| d_out[i * c + b] * proj.weight[a * c + b]).sum();
        }
    }
    let (mut dq, mut dk, mut dv) = (vec![0.0; q.len()], vec![0.0; k.len()], vec![0.0; v.len()]);
    for h in 0..heads {
        let (qh, kh, vh) = (head_slice(q, nq, c, h, dh), head_slice(k, nk, c, h, dh), head_slice(v, nk, c, h, dh));
        let doh = head_slice(&d_heads, nq, c, h, dh);
        let a = &fwd.attention[h];
        let dvh = matmul_tn(a, &doh, nq, nk, dh);
        for i in 0..nq {
            let da: Vec<f64> = (0..nk)
                .map(|j| doh[i * dh..(i + 1) * dh].iter().zip(&vh[j * dh..(j + 1) * dh]).map(|(x, y)| x * y).sum())
                .collect();
            let arow = &a[i * nk..(i + 1) * nk];
            let dot: f64 = da.iter().zip(arow).map(|(x, y)| x * y).sum();
            for j in 0..nk {
                let ds = arow[j] * (da[j] - dot) * scale;
                if ds == 0.0 {
                    continue;
                }
                for t in 0..dh {
                    dq[i * c + h * dh + t] += ds * kh[j * dh + t];
                    dk[j * c + h * dh + t] += ds * qh[i * dh + t];
                }
            }
        }
        for j in 0..nk {
            dv[j * c + h * dh..j * c + (h + 1) * dh].copy_from_slice(&dvh[j * dh..(j + 1) * dh]);
        }
    }
    Ok(MhaGrads { q: dq, k: dk, v: dv, weight: d_weight, bias: d_bias })
}
