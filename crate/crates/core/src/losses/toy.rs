//! Desk-scale training loop: free per-pixel embeddings and a vertex table
//! fitted by plain gradient descent on `lambda1 * (L_geo + alpha * L_cst)`
//! with the expected-mode geodesic loss.
//!
//! Only the cross-view half of the consistency loss is used. The
//! same-image half has a kink at `d = s` that makes fixed-step descent
//! oscillate, and the geodesic term already keeps embeddings apart.

use super::{loss_consistency, loss_geodesic, GeodesicMode, LossWeights};
use crate::correspondence::{CorrespondenceSet, Mask, Pixel};
use crate::embedding::{EmbeddingField, VertexEmbeddingTable, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::geodesics::GeodesicCache;
use crate::rng::{normal, stage_rng};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub dim: usize,
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 50.0,
            temperature: 0.3,
            dim: DEFAULT_DIM,
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyResult {
    /// One field per scene image; the mask marks the annotated pixels.
    pub fields: Vec<EmbeddingField>,
    pub table: VertexEmbeddingTable,
    /// Objective before each step, followed by the final value.
    pub trace: Vec<f64>,
}

/// Cross-view pixel pairs from `a`'s links into `b`.
fn cross_pairs(a: &CorrespondenceSet, b: &CorrespondenceSet) -> Vec<(Pixel, Pixel)> {
    a.cross_view.iter().filter(|l| l.partner_image == b.image).map(|l| (l.local, l.partner)).collect()
}

/// Two image indices and their linked pixel pairs.
type LinkedPair = (usize, usize, Vec<(Pixel, Pixel)>);

struct Problem<'a> {
    sets: &'a [CorrespondenceSet],
    cache: GeodesicCache,
    pairs: Vec<LinkedPair>,
    cfg: ToyConfig,
}

impl Problem<'_> {
    fn objective(&self, fields: &[EmbeddingField], table: &VertexEmbeddingTable) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>)> {
        let w = self.cfg.weights;
        let mut field_grads: Vec<Vec<f64>> = fields.iter().map(|f| vec![0.0; f.data().len()]).collect();
        let mut table_grad = vec![0.0; table.data().len()];
        let mut value = 0.0;
        let n_img = self.sets.len() as f64;
        for (i, set) in self.sets.iter().enumerate() {
            let r = loss_geodesic(&fields[i], table, self.cfg.temperature, set, &self.cache, GeodesicMode::Expected)?;
            let k = w.lambda1 / n_img;
            value += k * r.value;
            axpy(&mut field_grads[i], k, r.gradient("field"));
            axpy(&mut table_grad, k, r.gradient("table"));
        }
        if !self.pairs.is_empty() {
            let k = w.lambda1 * w.alpha / self.pairs.len() as f64;
            for (a, b, cross) in &self.pairs {
                let r = loss_consistency((&fields[*a], &fields[*b]), cross, &[], &self.cache, self.cache.g_max())?;
                value += k * r.value;
                axpy(&mut field_grads[*a], k, r.gradient("field0"));
                axpy(&mut field_grads[*b], k, r.gradient("field1"));
            }
        }
        Ok((value, field_grads, table_grad))
    }
}

fn axpy(dst: &mut [f64], k: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

/// Fits embeddings for every image of `scene`. Deterministic given
/// `cfg.seed`. A non-finite objective aborts with [`Error::Divergence`].
pub fn optimize_embeddings(scene: &Scene, cfg: &ToyConfig) -> Result<ToyResult> {
    cfg.weights.validate()?;
    if !(cfg.learning_rate > 0.0) || !(cfg.temperature > 0.0) || cfg.dim == 0 {
        return Err(Error::Argument(format!("bad toy configuration {cfg:?}")));
    }
    let sources = scene.annotated_vertices();
    let cache = GeodesicCache::for_mesh(&scene.mesh, &sources)?;
    let mut pairs = Vec::new();
    for a in 0..scene.sets.len() {
        for b in a + 1..scene.sets.len() {
            let cross = cross_pairs(&scene.sets[a], &scene.sets[b]);
            if cross.is_empty() {
                continue;
            }
            pairs.push((a, b, cross));
        }
    }
    let problem = Problem { sets: &scene.sets, cache, pairs, cfg: *cfg };

    let init_scale = 1.0 / (cfg.dim as f64).sqrt();
    let mut rng = stage_rng(cfg.seed, "toy-init");
    let mut fields = scene
        .sets
        .iter()
        .map(|s| {
            let mut mask = Mask::filled(s.height, s.width, false);
            for e in &s.entries {
                mask.set(e.pixel, true);
            }
            let mut f = EmbeddingField::zeros(mask, cfg.dim)?;
            for e in &s.entries {
                for x in f.at_mut(e.pixel) {
                    *x = init_scale * normal(&mut rng);
                }
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_v = scene.mesh.vertex_count();
    let table_data = (0..n_v * cfg.dim).map(|_| init_scale * normal(&mut rng)).collect();
    let mut table = VertexEmbeddingTable::new(n_v, cfg.dim, table_data)?;

    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for step in 0..=cfg.steps {
        let (value, field_grads, table_grad) = problem.objective(&fields, &table)?;
        trace.push(value);
        if !value.is_finite() {
            return Err(Error::Divergence { step, trace });
        }
        if step == cfg.steps {
            break;
        }
        for (f, g) in fields.iter_mut().zip(&field_grads) {
            axpy(f.data_mut(), -cfg.learning_rate, g);
        }
        axpy(table.data_mut(), -cfg.learning_rate, &table_grad);
    }
    Ok(ToyResult { fields, table, trace })
}
