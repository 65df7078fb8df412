//! Principal components of the foreground embeddings, for visualization.

use nalgebra::{DMatrix, SymmetricEigen};

use super::EmbeddingField;
use crate::correspondence::Pixel;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a component counts as absent.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub height: usize,
    pub width: usize,
    pub out_dims: usize,
    /// Per-pixel component scores, `H x W x out_dims`; zero on background.
    pub scores: Vec<f64>,
    /// Foreground scores min-max scaled to `[0, 1]` per channel.
    pub normalized: Vec<f64>,
    /// `out_dims` unit columns of length `D`. Zero columns beyond `rank`.
    pub basis: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Number of nonzero components among the first `out_dims`.
    pub rank: usize,
    mask: Vec<bool>,
}

impl PcaProjection {
    pub fn is_degenerate(&self) -> bool {
        self.rank < self.out_dims
    }

    /// Explained-variance share of each kept component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        self.eigenvalues.iter().take(self.out_dims).map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 }).collect()
    }

    /// `mean + basis * scores` at `p`.
    pub fn reconstruct(&self, p: Pixel) -> Vec<f64> {
        let o = (p.row * self.width + p.col) * self.out_dims;
        let mut out = self.mean.clone();
        for (k, col) in self.basis.iter().enumerate() {
            for (x, b) in out.iter_mut().zip(col) {
                *x += self.scores[o + k] * b;
            }
        }
        out
    }

    /// Binary PPM of the first three normalized channels; background black.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut rgb = vec![0u8; self.height * self.width * 3];
        for i in 0..self.height * self.width {
            if !self.mask[i] {
                continue;
            }
            for ch in 0..3.min(self.out_dims) {
                rgb[i * 3 + ch] = (self.normalized[i * self.out_dims + ch] * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
        crate::io::encode_ppm(self.height, self.width, &rgb)
    }
}

/// Projects the foreground embeddings onto their top `out_dims` principal
/// axes. Each axis is signed so its largest-magnitude coefficient is positive.
pub fn pca_project(field: &EmbeddingField, out_dims: usize) -> Result<PcaProjection> {
    let d = field.dim();
    let pixels: Vec<Pixel> = field.mask().pixels().collect();
    if out_dims == 0 || out_dims > d {
        return Err(Error::Argument(format!("cannot project {d} dims onto {out_dims}")));
    }
    if pixels.len() < out_dims {
        return Err(Error::Argument(format!("{} foreground pixels, need at least {out_dims}", pixels.len())));
    }
    let n = pixels.len() as f64;
    let mut mean = vec![0.0; d];
    for &p in &pixels {
        for (m, x) in mean.iter_mut().zip(field.at(p)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let centered = DMatrix::from_fn(pixels.len(), d, |i, j| field.at(pixels[i])[j] - mean[j]);
    let cov = centered.transpose() * &centered / n;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let floor = RANK_TOLERANCE * eigenvalues[0].abs().max(f64::MIN_POSITIVE);
    let mut rank = 0;
    let basis: Vec<Vec<f64>> = order
        .iter()
        .take(out_dims)
        .map(|&i| {
            if eig.eigenvalues[i] <= floor {
                return vec![0.0; d];
            }
            rank += 1;
            let mut col: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            if lead < 0.0 {
                col.iter_mut().for_each(|v| *v = -*v);
            }
            col
        })
        .collect();

    let hw = field.height() * field.width();
    let mut scores = vec![0.0; hw * out_dims];
    for (i, &p) in pixels.iter().enumerate() {
        let row = centered.row(i);
        let o = (p.row * field.width() + p.col) * out_dims;
        for (k, col) in basis.iter().enumerate() {
            scores[o + k] = row.iter().zip(col).map(|(a, b)| a * b).sum();
        }
    }
    let mut normalized = vec![0.0; hw * out_dims];
    for k in 0..out_dims {
        let vals = pixels.iter().map(|p| scores[(p.row * field.width() + p.col) * out_dims + k]);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        let span = hi - lo;
        for p in &pixels {
            let o = (p.row * field.width() + p.col) * out_dims + k;
            normalized[o] = if span > 0.0 { (scores[o] - lo) / span } else { 0.0 };
        }
    }
    Ok(PcaProjection {
        height: field.height(),
        width: field.width(),
        out_dims,
        scores,
        normalized,
        basis,
        mean,
        eigenvalues,
        rank,
        mask: field.mask().data.clone(),
    })
}
