use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Which gallery samples count for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Same id is positive; same id and camera is dropped.
    Standard,
    /// Like standard, but same id and same clothes is also dropped.
    ClothChanging,
    /// Only same id and same clothes is positive; same id in other clothes
    /// is dropped.
    SameClothes,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Standard, Protocol::ClothChanging, Protocol::SameClothes];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::ClothChanging => "cloth-changing",
            Protocol::SameClothes => "same-clothes",
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown protocol {s:?}; expected standard, cloth-changing or same-clothes")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleLabels {
    pub id: i64,
    pub cam: i64,
    pub clothes: i64,
}

/// Row-major feature matrices with per-row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalInstance {
    pub dim: usize,
    pub query: Vec<f64>,
    pub query_labels: Vec<SampleLabels>,
    pub gallery: Vec<f64>,
    pub gallery_labels: Vec<SampleLabels>,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReidResult {
    pub map: f64,
    /// `cmc[k - 1]` is the fraction of evaluated queries with a positive in
    /// the top `k`; one entry per gallery sample.
    pub cmc: Vec<f64>,
    pub evaluated: usize,
    /// Queries left without any positive after exclusions.
    pub skipped: Vec<usize>,
}

impl ReidResult {
    pub fn rank(&self, k: usize) -> f64 {
        match self.cmc.get(k.saturating_sub(1)) {
            Some(&v) => v,
            None => self.cmc.last().copied().unwrap_or(0.0),
        }
    }
}

enum Role {
    Positive,
    Negative,
    Dropped,
}

fn role(q: SampleLabels, g: SampleLabels, protocol: Protocol) -> Role {
    let same_id = q.id == g.id;
    if same_id && q.cam == g.cam {
        return Role::Dropped;
    }
    match protocol {
        _ if !same_id => Role::Negative,
        Protocol::Standard => Role::Positive,
        Protocol::ClothChanging if q.clothes == g.clothes => Role::Dropped,
        Protocol::ClothChanging => Role::Positive,
        Protocol::SameClothes if q.clothes == g.clothes => Role::Positive,
        Protocol::SameClothes => Role::Dropped,
    }
}

impl RetrievalInstance {
    fn validate(&self) -> Result<(usize, usize)> {
        if self.dim == 0 {
            return Err(Error::Shape("feature dimension 0".into()));
        }
        let check = |name: &str, feats: &[f64], labels: &[SampleLabels]| {
            if feats.len() != labels.len() * self.dim {
                return Err(Error::Shape(format!(
                    "{name}: {} values for {} labels of dimension {}",
                    feats.len(),
                    labels.len(),
                    self.dim
                )));
            }
            if feats.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{name} features")));
            }
            Ok(labels.len())
        };
        let nq = check("query", &self.query, &self.query_labels)?;
        let ng = check("gallery", &self.gallery, &self.gallery_labels)?;
        if nq == 0 || ng == 0 {
            return Err(Error::Empty("query or gallery set".into()));
        }
        Ok((nq, ng))
    }

    /// Average precision and first-hit rank (0-based) of query `q`, or
    /// `None` when it has no positive.
    fn score_query(&self, q: usize, ng: usize) -> Option<(f64, usize)> {
        let d = self.dim;
        let qf = &self.query[q * d..(q + 1) * d];
        let mut ranked: Vec<(f64, usize, bool)> = (0..ng)
            .filter_map(|g| {
                let positive = match role(self.query_labels[q], self.gallery_labels[g], self.protocol) {
                    Role::Dropped => return None,
                    Role::Positive => true,
                    Role::Negative => false,
                };
                let gf = &self.gallery[g * d..(g + 1) * d];
                let dist: f64 = qf.iter().zip(gf).map(|(a, b)| (a - b) * (a - b)).sum();
                Some((dist.sqrt(), g, positive))
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut hits = 0usize;
        let mut precision_sum = 0.0;
        let mut first = None;
        for (rank, &(_, _, positive)) in ranked.iter().enumerate() {
            if positive {
                hits += 1;
                precision_sum += hits as f64 / (rank + 1) as f64;
                first.get_or_insert(rank);
            }
        }
        first.map(|f| (precision_sum / hits as f64, f))
    }
}

/// Ranks the gallery by Euclidean distance for every query (ties by
/// gallery index) and averages AP and CMC over queries that keep at least
/// one positive.
pub fn reid_eval(instance: &RetrievalInstance) -> Result<ReidResult> {
    let (nq, ng) = instance.validate()?;
    let per_query: Vec<Option<(f64, usize)>> = (0..nq).into_par_iter().map(|q| instance.score_query(q, ng)).collect();
    let skipped: Vec<usize> = (0..nq).filter(|&q| per_query[q].is_none()).collect();
    let scored: Vec<(f64, usize)> = per_query.into_iter().flatten().collect();
    if scored.is_empty() {
        return Err(Error::Validation(format!("no query has a valid positive under {}", instance.protocol.name())));
    }
    let n = scored.len() as f64;
    let map = scored.iter().map(|s| s.0).sum::<f64>() / n;
    let mut first_hits = vec![0usize; ng];
    for &(_, f) in &scored {
        first_hits[f] += 1;
    }
    let mut cum = 0usize;
    let cmc = first_hits
        .into_iter()
        .map(|c| {
            cum += c;
            cum as f64 / n
        })
        .collect();
    Ok(ReidResult { map, cmc, evaluated: scored.len(), skipped })
}
