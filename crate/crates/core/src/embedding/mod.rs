//! Per-pixel surface embeddings, the per-vertex embedding table, and
//! pixel-to-vertex classification.

mod file;
mod pca;

pub use file::{decode_field, encode_field, read_field, write_field};
pub use pca::{pca_project, PcaProjection};

use crate::correspondence::{Mask, Pixel};
use crate::error::{Error, Result};

/// Default embedding width.
pub const DEFAULT_DIM: usize = 64;

/// `H x W x D` embeddings with a foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingField {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f64>,
    mask: Mask,
}

impl EmbeddingField {
    pub fn new(dim: usize, data: Vec<f64>, mask: Mask) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be at least 1".into()));
        }
        let expect = mask.height * mask.width * dim;
        if data.len() != expect {
            return Err(Error::Shape(format!(
                "field {}x{}x{dim} needs {expect} values, got {}",
                mask.height,
                mask.width,
                data.len()
            )));
        }
        Ok(Self { height: mask.height, width: mask.width, dim, data, mask })
    }

    pub fn zeros(mask: Mask, dim: usize) -> Result<Self> {
        let n = mask.height * mask.width * dim;
        Self::new(dim, vec![0.0; n], mask)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Offset of `p`'s embedding in [`data`](Self::data).
    pub fn offset(&self, p: Pixel) -> usize {
        (p.row * self.width + p.col) * self.dim
    }

    pub fn at(&self, p: Pixel) -> &[f64] {
        let o = self.offset(p);
        &self.data[o..o + self.dim]
    }

    pub fn at_mut(&mut self, p: Pixel) -> &mut [f64] {
        let o = self.offset(p);
        let d = self.dim;
        &mut self.data[o..o + d]
    }

    /// Embedding at a foreground pixel.
    pub fn foreground(&self, p: Pixel) -> Result<&[f64]> {
        if !self.mask.get(p) {
            return Err(Error::Argument(format!("pixel ({}, {}) is outside the foreground mask", p.row, p.col)));
        }
        Ok(self.at(p))
    }
}

/// One embedding row per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexEmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl VertexEmbeddingTable {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || rows == 0 {
            return Err(Error::Argument("vertex table must be nonempty".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Shape(format!("table {rows}x{dim} needs {} values, got {}", rows * dim, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vertex table entry".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dim..(v + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Classification logits `<e, t_v> / temperature` for every vertex.
pub fn vertex_logits(embedding: &[f64], table: &VertexEmbeddingTable, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::Argument(format!("temperature must be positive, got {temperature}")));
    }
    if embedding.len() != table.dim() {
        return Err(Error::Shape(format!("embedding has {} dims, table has {}", embedding.len(), table.dim())));
    }
    Ok((0..table.rows()).map(|v| dot(embedding, table.row(v)) / temperature).collect())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Probability of each vertex for a foreground pixel.
pub fn classify_pixel(
    field: &EmbeddingField,
    pixel: Pixel,
    table: &VertexEmbeddingTable,
    temperature: f64,
) -> Result<Vec<f64>> {
    Ok(softmax(&vertex_logits(field.foreground(pixel)?, table, temperature)?))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Predicted vertex per foreground pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Option<usize>>,
}

impl VertexMap {
    pub fn get(&self, p: Pixel) -> Option<usize> {
        if p.row < self.height && p.col < self.width {
            self.data[p.row * self.width + p.col]
        } else {
            None
        }
    }
}

/// Argmax vertex at every foreground pixel.
pub fn predict_vertices(field: &EmbeddingField, table: &VertexEmbeddingTable) -> Result<VertexMap> {
    if field.dim() != table.dim() {
        return Err(Error::Shape(format!("field has {} dims, table has {}", field.dim(), table.dim())));
    }
    let data = (0..field.height() * field.width())
        .map(|i| {
            let p = Pixel::new(i / field.width(), i % field.width());
            field.mask().get(p).then(|| {
                let e = field.at(p);
                let scores: Vec<f64> = (0..table.rows()).map(|v| dot(e, table.row(v))).collect();
                argmax(&scores)
            })
        })
        .collect();
    Ok(VertexMap { height: field.height(), width: field.width(), data })
}

/// `1 - cos(e1, e2)`, in `[0, 2]`.
pub fn cosine_distance(e1: &[f64], e2: &[f64]) -> Result<f64> {
    if e1.len() != e2.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", e1.len(), e2.len())));
    }
    let (s1, s2) = (dot(e1, e1), dot(e2, e2));
    if s1 == 0.0 || s2 == 0.0 {
        return Err(Error::Argument("cosine distance of a zero vector".into()));
    }
    Ok(1.0 - (dot(e1, e2) / (s1 * s2).sqrt()).clamp(-1.0, 1.0))
}
