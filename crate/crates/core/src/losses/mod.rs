//! Training objectives with analytic gradients.
//!
//! Every loss returns a [`LossReport`]: the scalar value, gradients keyed by
//! input name, and a breakdown of named sub-terms.

mod consistency;
mod geodesic;
pub mod gradcheck;
mod reid;
mod silhouette;
pub mod suite;
mod toy;

use std::collections::BTreeMap;

pub use consistency::{loss_consistency, SameImagePair};
pub use geodesic::{loss_geodesic, GeodesicMode};
pub use gradcheck::{check_gradient, GradCheck};
pub use reid::{loss_id, loss_triplet};
pub use silhouette::loss_silhouette;
pub use toy::{optimize_embeddings, ToyConfig, ToyResult};

use crate::error::{Error, Result};

/// Floor applied to probabilities inside every logarithm.
pub const PROB_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    pub value: f64,
    pub gradients: BTreeMap<String, Vec<f64>>,
    pub terms: BTreeMap<String, f64>,
}

impl LossReport {
    pub fn gradient(&self, name: &str) -> &[f64] {
        self.gradients.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Unweighted sum of reports; gradients with equal names are added.
    pub fn sum<'a>(parts: impl IntoIterator<Item = &'a LossReport>) -> Result<LossReport> {
        let mut out = LossReport::default();
        for p in parts {
            accumulate(&mut out, p, 1.0)?;
        }
        Ok(out)
    }
}

fn accumulate(out: &mut LossReport, part: &LossReport, weight: f64) -> Result<()> {
    out.value += weight * part.value;
    for (name, g) in &part.gradients {
        match out.gradients.get_mut(name) {
            Some(acc) => {
                if acc.len() != g.len() {
                    return Err(Error::Shape(format!("gradient {name:?}: {} vs {} entries", acc.len(), g.len())));
                }
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += weight * b;
                }
            }
            None => {
                out.gradients.insert(name.clone(), g.iter().map(|b| weight * b).collect());
            }
        }
    }
    Ok(())
}

/// Objective weights. Defaults: `lambda1 = 0.3`, `alpha = 5.0`,
/// `lambda2 = 1.0`, `lambda3 = 0.8`, triplet margin `0.3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub alpha: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda1: 0.3, alpha: 5.0, lambda2: 1.0, lambda3: 0.8, margin: 0.3 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.alpha, self.lambda2, self.lambda3, self.margin];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Argument(format!("weights must be nonnegative: {self:?}")))
        }
    }
}

/// Names of the sub-losses combined by [`loss_total`].
pub const PART_NAMES: [&str; 5] = ["sil", "geo", "cst", "id", "tri"];

/// `sil + lambda1 * (geo + alpha * cst) + lambda2 * id + lambda3 * tri`.
///
/// `parts` must contain every name in [`PART_NAMES`]. Gradients are combined
/// with the same weights.
pub fn loss_total(parts: &BTreeMap<String, LossReport>, w: &LossWeights) -> Result<LossReport> {
    w.validate()?;
    let factors = [1.0, w.lambda1, w.lambda1 * w.alpha, w.lambda2, w.lambda3];
    let mut out = LossReport::default();
    for (name, factor) in PART_NAMES.iter().zip(factors) {
        let part = parts.get(*name).ok_or_else(|| Error::Argument(format!("missing loss part {name:?}")))?;
        if !part.value.is_finite() {
            return Err(Error::NonFinite(format!("loss part {name:?} = {}", part.value)));
        }
        accumulate(&mut out, part, factor)?;
        out.terms.insert((*name).to_string(), part.value);
    }
    Ok(out)
}
