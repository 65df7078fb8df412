use super::LossReport;
use crate::error::{Error, Result};

/// Mean softmax cross-entropy of `logits` (`N x C`, row-major). Gradient
/// reported as `"logits"`.
pub fn loss_id(logits: &[f64], classes: usize, labels: &[usize]) -> Result<LossReport> {
    if classes == 0 || labels.is_empty() || logits.len() != labels.len() * classes {
        return Err(Error::Shape(format!("{} logits for {} samples x {classes} classes", logits.len(), labels.len())));
    }
    let n = labels.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::IndexOutOfRange { index: y, len: classes });
        }
        let row = &logits[i * classes..(i + 1) * classes];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        value += lse - row[y];
        for (c, g) in grad[i * classes..(i + 1) * classes].iter_mut().enumerate() {
            let p = (row[c] - lse).exp();
            *g = (p - if c == y { 1.0 } else { 0.0 }) / n;
        }
    }
    let mut r = LossReport { value: value / n, ..Default::default() };
    r.gradients.insert("logits".into(), grad);
    Ok(r)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Batch-hard triplet loss: for each anchor, the farthest positive and the
/// nearest negative (Euclidean), `max(0, d_pos - d_neg + margin)`, averaged
/// over anchors. Ties in mining go to the lower sample index. Subgradient
/// reported as `"features"`; pairs at zero distance contribute none.
pub fn loss_triplet(features: &[f64], dim: usize, labels: &[usize], margin: f64) -> Result<LossReport> {
    let n = labels.len();
    if dim == 0 || n == 0 || features.len() != n * dim {
        return Err(Error::Shape(format!("{} features for {n} samples x {dim}", features.len())));
    }
    if !(margin >= 0.0) {
        return Err(Error::Argument(format!("margin must be nonnegative, got {margin}")));
    }
    for (i, &l) in labels.iter().enumerate() {
        let positives = labels.iter().enumerate().filter(|&(j, &m)| j != i && m == l).count();
        if positives == 0 {
            return Err(Error::Argument(format!("sample {i} (label {l}) has no positive in the batch")));
        }
        if labels.iter().all(|&m| m == l) {
            return Err(Error::Argument("batch has no negatives".into()));
        }
    }
    let row = |i: usize| &features[i * dim..(i + 1) * dim];
    let mut value = 0.0;
    let mut grad = vec![0.0; features.len()];
    let mut active = 0usize;
    for a in 0..n {
        let mut pos = (usize::MAX, f64::NEG_INFINITY);
        let mut neg = (usize::MAX, f64::INFINITY);
        for j in 0..n {
            if j == a {
                continue;
            }
            let d = euclidean(row(a), row(j));
            if labels[j] == labels[a] {
                if d > pos.1 {
                    pos = (j, d);
                }
            } else if d < neg.1 {
                neg = (j, d);
            }
        }
        let hinge = pos.1 - neg.1 + margin;
        if hinge <= 0.0 {
            continue;
        }
        active += 1;
        value += hinge;
        // d|a - x| / da = (a - x) / |a - x|
        for (x, sign) in [(pos, 1.0), (neg, -1.0)] {
            if x.1 == 0.0 {
                continue;
            }
            for k in 0..dim {
                let u = (features[a * dim + k] - features[x.0 * dim + k]) / x.1;
                grad[a * dim + k] += sign * u / n as f64;
                grad[x.0 * dim + k] -= sign * u / n as f64;
            }
        }
    }
    let mut r = LossReport { value: value / n as f64, ..Default::default() };
    r.gradients.insert("features".into(), grad);
    r.terms.insert("active_anchors".into(), active as f64);
    Ok(r)
}
