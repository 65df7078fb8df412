//! Cross-modality fusion: latent convolutional projection (LCP), multi-head
//! cross-attention with residuals, and per-modality class tokens.
//!
//! Every forward operator has a matching backward pass so the operators
//! can be fine-tuned and gradient-checked.

mod attention;
mod autoencoder;
mod cross;
mod lcp;

pub use attention::{mha, mha_backward, MhaGrads, MhaOutput, OutputProjection};
pub use autoencoder::{train_autoencoder, LatentEncoder, TrainedAutoencoder};
pub use cross::{cross_fuse, cross_fuse_backward, FusedOutput, FusionGrads, FusionParams, ModalityGrads, ModalityParams};
pub use lcp::{lcp_backward, lcp_project, lcp_project_with_latent, ConvKernel, LcpGrads};

use crate::error::{Error, Result};

pub const DEFAULT_HEADS: usize = 4;
pub const DEFAULT_KERNEL: usize = 3;

/// An `h x w x c` feature map, stored row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMap {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl TokenMap {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Shape(format!("token map {h}x{w}x{c} has an empty axis")));
        }
        if data.len() != h * w * c {
            return Err(Error::Shape(format!("token map {h}x{w}x{c} needs {} values, got {}", h * w * c, data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("token map entries".into()));
        }
        Ok(Self { h, w, c, data })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Result<Self> {
        Self::new(h, w, c, vec![0.0; h * w * c])
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    pub fn tokens(&self) -> usize {
        self.h * self.w
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    /// Row-major flattening, which is also the token sequence order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn token(&self, y: usize, x: usize) -> &[f64] {
        let o = (y * self.w + x) * self.c;
        &self.data[o..o + self.c]
    }
}

/// `a (n x k) * b (k x m)`, row-major.
pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for (t, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av != 0.0 {
                for (o, &bv) in row.iter_mut().zip(&b[t * m..(t + 1) * m]) {
                    *o += av * bv;
                }
            }
        }
    }
    out
}

/// `a^T (k x n) * b (n x m)` for row-major `a (n x k)`.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * m];
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for (t, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av != 0.0 {
                for (o, &bv) in out[t * m..(t + 1) * m].iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
    out
}

/// `a (n x k) * b^T (k x m)` for row-major `b (m x k)`.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..m {
            out[i * m + j] = arow.iter().zip(&b[j * k..(j + 1) * k]).map(|(x, y)| x * y).sum();
        }
    }
    out
}
