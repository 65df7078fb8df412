use super::LossReport;
use crate::correspondence::Pixel;
use crate::embedding::{dot, EmbeddingField};
use crate::error::{Error, Result};
use crate::geodesics::{scale, GeodesicCache};

/// Two annotated pixels of the same image (`image` 0 or 1) with their
/// vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SameImagePair {
    pub image: usize,
    pub p1: Pixel,
    pub p2: Pixel,
    pub v1: usize,
    pub v2: usize,
}

/// Cosine distance and its gradients with respect to both arguments.
fn cosine_distance_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (aa, bb, ab) = (dot(a, a), dot(b, b), dot(a, b));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Argument("cosine distance of a zero embedding".into()));
    }
    let norm = (aa * bb).sqrt();
    let cos = ab / norm;
    let ga = a.iter().zip(b).map(|(x, y)| -(y / norm - cos * x / aa)).collect();
    let gb = a.iter().zip(b).map(|(x, y)| -(x / norm - cos * y / bb)).collect();
    Ok((1.0 - cos, ga, gb))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn add_scaled(dst: &mut [f64], offset: usize, src: &[f64], k: f64) {
    for (d, s) in dst[offset..offset + src.len()].iter_mut().zip(src) {
        *d += k * s;
    }
}

/// Cross-view consistency plus same-image geodesic affinity:
///
/// `(1/N1) sum log(1 + exp(d(p, q))) + (1/N2) sum log(1 + exp(|d(p1, p2) - s(g(v1, v2))|))`
///
/// with `d` the cosine distance and `s` the scale map with `g_max`. A term
/// whose pair list is empty contributes nothing. Gradients are reported as
/// `"field0"` and `"field1"`; terms as `"cross"` and `"same"`.
pub fn loss_consistency(
    fields: (&EmbeddingField, &EmbeddingField),
    cross_pairs: &[(Pixel, Pixel)],
    same_image_pairs: &[SameImagePair],
    cache: &GeodesicCache,
    g_max: f64,
) -> Result<LossReport> {
    if cross_pairs.is_empty() && same_image_pairs.is_empty() {
        return Err(Error::Argument("consistency loss needs at least one pair".into()));
    }
    let (f0, f1) = fields;
    if f0.dim() != f1.dim() {
        return Err(Error::Shape(format!("fields have {} and {} dims", f0.dim(), f1.dim())));
    }
    let mut g0 = vec![0.0; f0.data().len()];
    let mut g1 = vec![0.0; f1.data().len()];

    let mut cross = 0.0;
    if !cross_pairs.is_empty() {
        let n1 = cross_pairs.len() as f64;
        for &(p, q) in cross_pairs {
            let (d, ga, gb) = cosine_distance_grad(f0.foreground(p)?, f1.foreground(q)?)?;
            cross += softplus(d) / n1;
            let k = sigmoid(d) / n1;
            add_scaled(&mut g0, f0.offset(p), &ga, k);
            add_scaled(&mut g1, f1.offset(q), &gb, k);
        }
    }

    let mut same = 0.0;
    if !same_image_pairs.is_empty() {
        let n2 = same_image_pairs.len() as f64;
        for pair in same_image_pairs {
            let (field, grad) = match pair.image {
                0 => (f0, &mut g0),
                1 => (f1, &mut g1),
                i => return Err(Error::Argument(format!("same-image pair refers to image {i}"))),
            };
            let (d, ga, gb) = cosine_distance_grad(field.foreground(pair.p1)?, field.foreground(pair.p2)?)?;
            let target = scale(cache.distance(pair.v1, pair.v2)?, g_max)?;
            let gap = d - target;
            same += softplus(gap.abs()) / n2;
            let k = gap.signum() * sigmoid(gap.abs()) / n2;
            let k = if gap == 0.0 { 0.0 } else { k };
            add_scaled(grad, field.offset(pair.p1), &ga, k);
            add_scaled(grad, field.offset(pair.p2), &gb, k);
        }
    }

    let mut r = LossReport { value: cross + same, ..Default::default() };
    r.terms.insert("cross".into(), cross);
    r.terms.insert("same".into(), same);
    r.gradients.insert("field0".into(), g0);
    r.gradients.insert("field1".into(), g1);
    Ok(r)
}
