use super::{matmul, matmul_nt, matmul_tn, TokenMap};
use crate::error::{Error, Result};
use crate::rng::{normal, stage_rng};

/// Linear map from a flattened `h x w x c` token map to a `c`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEncoder {
    shape: (usize, usize, usize),
    /// `c x (h*w*c)`, row-major.
    weights: Vec<f64>,
    frozen: bool,
}

impl LatentEncoder {
    pub fn new(shape: (usize, usize, usize), weights: Vec<f64>, frozen: bool) -> Result<Self> {
        let (h, w, c) = shape;
        if h * w * c == 0 {
            return Err(Error::Shape(format!("encoder input {h}x{w}x{c} has an empty axis")));
        }
        if weights.len() != c * h * w * c {
            return Err(Error::Shape(format!("encoder needs {} weights, got {}", c * h * w * c, weights.len())));
        }
        Ok(Self { shape, weights, frozen })
    }

    /// An all-zero frozen encoder, which makes LCP a plain convolution.
    pub fn zero(shape: (usize, usize, usize)) -> Result<Self> {
        let (h, w, c) = shape;
        Self::new(shape, vec![0.0; c * h * w * c], true)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    fn input_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn encode(&self, f: &TokenMap) -> Result<Vec<f64>> {
        if f.shape() != self.shape {
            return Err(Error::Shape(format!("encoder expects {:?}, got {:?}", self.shape, f.shape())));
        }
        Ok(matmul_nt(&self.weights, f.data(), self.shape.2, self.input_len(), 1))
    }

    /// `E^T dl`: gradient of a loss through the encoder into its input.
    pub(crate) fn backward(&self, dl: &[f64]) -> Vec<f64> {
        matmul_tn(&self.weights, dl, self.shape.2, self.input_len(), 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAutoencoder {
    /// Frozen after training.
    pub encoder: LatentEncoder,
    /// `(h*w*c) x c`, row-major; kept only for diagnostics.
    pub decoder: Vec<f64>,
    /// Mean squared reconstruction error before each step and at the end.
    pub trace: Vec<f64>,
}

impl TrainedAutoencoder {
    pub fn reconstruct(&self, f: &TokenMap) -> Result<Vec<f64>> {
        let z = self.encoder.encode(f)?;
        Ok(matmul(&self.decoder, &z, self.encoder.input_len(), self.encoder.shape.2, 1))
    }
}

/// Trains a linear autoencoder `x -> D E x` by gradient descent on the mean
/// squared reconstruction error and returns the frozen encoder.
pub fn train_autoencoder(
    maps: &[TokenMap],
    latent_dim: usize,
    steps: usize,
    lr: f64,
    seed: u64,
) -> Result<TrainedAutoencoder> {
    let first = maps.first().ok_or_else(|| Error::Empty("autoencoder training set".into()))?;
    let shape = first.shape();
    if let Some(bad) = maps.iter().find(|m| m.shape() != shape) {
        return Err(Error::Shape(format!("token maps of shapes {shape:?} and {:?}", bad.shape())));
    }
    if latent_dim != shape.2 {
        return Err(Error::Shape(format!("latent dimension {latent_dim} must equal the channel count {}", shape.2)));
    }
    if !(lr > 0.0) {
        return Err(Error::Argument(format!("learning rate must be positive, got {lr}")));
    }
    let n = first.data().len();
    let (m, c) = (maps.len(), latent_dim);
    // x: m x n
    let x: Vec<f64> = maps.iter().flat_map(|t| t.data().iter().copied()).collect();
    let mut rng = stage_rng(seed, "autoencoder");
    let mut enc: Vec<f64> = (0..c * n).map(|_| normal(&mut rng) / (n as f64).sqrt()).collect();
    let mut dec: Vec<f64> = (0..n * c).map(|_| normal(&mut rng) / (c as f64).sqrt()).collect();
    let scale = 2.0 / (m * n) as f64;
    let mut trace = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let z = matmul_nt(&x, &enc, m, n, c); // m x c
        let recon = matmul_nt(&z, &dec, m, c, n); // m x n
        let resid: Vec<f64> = recon.iter().zip(&x).map(|(r, x)| r - x).collect();
        let mse = resid.iter().map(|r| r * r).sum::<f64>() / (m * n) as f64;
        trace.push(mse);
        if !mse.is_finite() {
            return Err(Error::Divergence { step, trace });
        }
        if step == steps {
            break;
        }
        let g_recon: Vec<f64> = resid.iter().map(|r| scale * r).collect();
        let g_dec = matmul_tn(&g_recon, &z, m, n, c); // n x c
        let g_z = matmul(&g_recon, &dec, m, n, c); // m x c
        let g_enc = matmul_tn(&g_z, &x, m, c, n); // c x n
        for (p, g) in dec.iter_mut().zip(&g_dec) {
            *p -= lr * g;
        }
        for (p, g) in enc.iter_mut().zip(&g_enc) {
            *p -= lr * g;
        }
    }
    Ok(TrainedAutoencoder { encoder: LatentEncoder::new(shape, enc, true)?, decoder: dec, trace })
}
