use rayon::prelude::*;

use super::{LossReport, PROB_FLOOR};
use crate::correspondence::CorrespondenceSet;
use crate::embedding::{argmax, softmax, vertex_logits, EmbeddingField, VertexEmbeddingTable};
use crate::error::{Error, Result};
use crate::geodesics::{scale, GeodesicCache};

/// How the geodesic classification loss is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeodesicMode {
    /// `-(1/N) sum g(v_p, v_hat) * log p(v_hat)` with `v_hat` the argmax
    /// vertex, which is held fixed when differentiating.
    #[default]
    Literal,
    /// `(1/N) sum_p sum_v p(v) * s(g(v_p, v))`: expected scaled geodesic
    /// error under the predicted distribution.
    Expected,
}

/// Geodesic-weighted pixel-to-vertex classification loss over the annotated
/// pixels of one image. Gradients are reported as `"field"` (`H*W*D`) and
/// `"table"` (`|V|*D`).
pub fn loss_geodesic(
    field: &EmbeddingField,
    table: &VertexEmbeddingTable,
    temperature: f64,
    corrs: &CorrespondenceSet,
    cache: &GeodesicCache,
    mode: GeodesicMode,
) -> Result<LossReport> {
    if corrs.entries.is_empty() {
        return Err(Error::Empty(format!("{} has no correspondences", corrs.image)));
    }
    if field.dim() != table.dim() {
        return Err(Error::Shape(format!("field has {} dims, table has {}", field.dim(), table.dim())));
    }
    if table.rows() != cache.vertex_count() {
        return Err(Error::Shape(format!("table has {} rows, cache covers {} vertices", table.rows(), cache.vertex_count())));
    }
    let n = corrs.entries.len() as f64;
    let d = table.dim();
    let rows = table.rows();
    let embeddings = corrs.entries.iter().map(|c| field.foreground(c.pixel)).collect::<Result<Vec<_>>>()?;

    // per pixel: loss contribution and d(loss)/d(logits), already divided by N
    let per_pixel = corrs
        .entries
        .par_iter()
        .zip(&embeddings)
        .map(|(c, e)| -> Result<(f64, Vec<f64>)> {
            let logits = vertex_logits(e, table, temperature)?;
            let p = softmax(&logits);
            let mut dz = vec![0.0; rows];
            let value = match mode {
                GeodesicMode::Literal => {
                    let v_hat = argmax(&logits);
                    let g = cache.distance(c.vertex, v_hat)?;
                    if p[v_hat] > PROB_FLOOR && g != 0.0 {
                        for (v, z) in dz.iter_mut().enumerate() {
                            let delta = if v == v_hat { 1.0 } else { 0.0 };
                            *z = -g * (delta - p[v]) / n;
                        }
                    }
                    -g * p[v_hat].max(PROB_FLOOR).ln()
                }
                GeodesicMode::Expected => {
                    let s: Vec<f64> = match cache.row(c.vertex) {
                        Some(row) => row.iter().map(|&g| scale(g, cache.g_max())).collect::<Result<_>>()?,
                        None => (0..rows).map(|v| cache.scaled(c.vertex, v)).collect::<Result<_>>()?,
                    };
                    let expected: f64 = p.iter().zip(&s).map(|(a, b)| a * b).sum();
                    for ((z, pv), sv) in dz.iter_mut().zip(&p).zip(&s) {
                        *z = pv * (sv - expected) / n;
                    }
                    expected
                }
            };
            Ok((value, dz))
        })
        .collect::<Result<Vec<_>>>()?;
    let value: f64 = per_pixel.iter().map(|(v, _)| v).sum();

    let mut g_field = vec![0.0; field.data().len()];
    let pixel_grads: Vec<Vec<f64>> = per_pixel
        .par_iter()
        .map(|(_, dz)| {
            let mut g = vec![0.0; d];
            for (v, &z) in dz.iter().enumerate().filter(|(_, z)| **z != 0.0) {
                for (gj, tj) in g.iter_mut().zip(table.row(v)) {
                    *gj += z / temperature * tj;
                }
            }
            g
        })
        .collect();
    for (c, g) in corrs.entries.iter().zip(&pixel_grads) {
        let off = field.offset(c.pixel);
        for (dst, src) in g_field[off..off + d].iter_mut().zip(g) {
            *dst += src;
        }
    }
    let g_table: Vec<f64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|v| {
            let mut g = vec![0.0; d];
            for ((_, dz), e) in per_pixel.iter().zip(&embeddings) {
                let z = dz[v];
                if z != 0.0 {
                    for (gj, ej) in g.iter_mut().zip(e.iter()) {
                        *gj += z / temperature * ej;
                    }
                }
            }
            g
        })
        .collect();
    let mut r = LossReport { value: value / n, ..Default::default() };
    r.gradients.insert("field".into(), g_field);
    r.gradients.insert("table".into(), g_table);
    Ok(r)
}
