//! Seeded random instances for gradient-checking every loss and fusion
//! operator. Each instance exposes a scalar objective of a flat parameter
//! vector together with its analytic gradient.

use std::str::FromStr;

use rand::Rng as _;

use super::gradcheck::{check_gradient, GradCheck, DEFAULT_STEP};
use super::{loss_consistency, loss_geodesic, loss_id, loss_silhouette, loss_triplet, GeodesicMode, SameImagePair};
use crate::correspondence::{Correspondence, CorrespondenceSet, Mask, Pixel};
use crate::embedding::{EmbeddingField, VertexEmbeddingTable};
use crate::error::{Error, Result};
use crate::fusion::{
    cross_fuse, cross_fuse_backward, lcp_backward, lcp_project, mha, mha_backward, ConvKernel, FusionParams, LatentEncoder,
    OutputProjection, TokenMap,
};
use crate::geodesics::GeodesicCache;
use crate::mesh::{make_test_mesh, TestMesh};
use crate::rng::{normal, stage_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradTarget {
    Silhouette,
    /// Expected mode; the literal mode is piecewise in the argmax.
    Geodesic,
    Consistency,
    Id,
    /// Margin large enough that every anchor's hinge is active.
    TripletActive,
    /// Well-separated clusters so every hinge is inactive.
    TripletInactive,
    Lcp,
    Mha,
    CrossFuse,
}

impl GradTarget {
    pub const ALL: [GradTarget; 9] = [
        GradTarget::Silhouette,
        GradTarget::Geodesic,
        GradTarget::Consistency,
        GradTarget::Id,
        GradTarget::TripletActive,
        GradTarget::TripletInactive,
        GradTarget::Lcp,
        GradTarget::Mha,
        GradTarget::CrossFuse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradTarget::Silhouette => "sil",
            GradTarget::Geodesic => "geo",
            GradTarget::Consistency => "cst",
            GradTarget::Id => "id",
            GradTarget::TripletActive => "tri",
            GradTarget::TripletInactive => "tri-inactive",
            GradTarget::Lcp => "lcp",
            GradTarget::Mha => "mha",
            GradTarget::CrossFuse => "fuse",
        }
    }
}

impl FromStr for GradTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GradTarget::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            let names: Vec<_> = GradTarget::ALL.iter().map(|t| t.name()).collect();
            Error::Argument(format!("unknown gradient target {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

pub type Objective = Box<dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Send + Sync>;

/// A differentiable objective and the point to check it at.
pub struct GradProblem {
    pub x: Vec<f64>,
    pub f: Objective,
}

fn randn(rng: &mut Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n).map(|_| sd * normal(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn corr_set(entries: Vec<Correspondence>, h: usize, w: usize) -> CorrespondenceSet {
    CorrespondenceSet {
        image: "grad".into(),
        height: h,
        width: w,
        pid: 0,
        cam: 0,
        clothes: 0,
        entries,
        cross_view: Vec::new(),
    }
}

impl GradTarget {
    /// Random instance drawn from `seed`.
    pub fn problem(self, seed: u64) -> Result<GradProblem> {
        let mut rng = stage_rng(seed, &format!("grad/{}", self.name()));
        match self {
            GradTarget::Silhouette => {
                let (h, w) = (10, 12);
                let mask = Mask::new(h, w, (0..h * w).map(|_| rng.random_bool(0.5)).collect())?;
                let x = (0..h * w).map(|_| rng.random_range(0.05..0.95)).collect();
                let f: Objective = Box::new(move |p| {
                    let r = loss_silhouette(p, &mask)?;
                    Ok((r.value, r.gradient("pred").to_vec()))
                });
                Ok(GradProblem { x, f })
            }
            GradTarget::Geodesic => {
                let mesh = make_test_mesh(TestMesh::Icosphere(1))?;
                let nv = mesh.vertex_count();
                let (h, w, d) = (3, 4, 8);
                let mut entries = Vec::new();
                for i in 0..h * w {
                    if i == 0 || rng.random_bool(0.7) {
                        entries.push(Correspondence { pixel: Pixel::new(i / w, i % w), vertex: rng.random_range(0..nv) });
                    }
                }
                let sources: Vec<usize> = entries.iter().map(|e| e.vertex).collect();
                let cache = GeodesicCache::for_mesh(&mesh, &sources)?;
                let corrs = corr_set(entries, h, w);
                let mask = Mask::filled(h, w, true);
                let n_field = h * w * d;
                let x = randn(&mut rng, n_field + nv * d, 0.5);
                let f: Objective = Box::new(move |p| {
                    let field = EmbeddingField::new(d, p[..n_field].to_vec(), mask.clone())?;
                    let table = VertexEmbeddingTable::new(nv, d, p[n_field..].to_vec())?;
                    let r = loss_geodesic(&field, &table, 0.5, &corrs, &cache, GeodesicMode::Expected)?;
                    Ok((r.value, [r.gradient("field"), r.gradient("table")].concat()))
                });
                Ok(GradProblem { x, f })
            }
            GradTarget::Consistency => {
                let mesh = make_test_mesh(TestMesh::Icosphere(1))?;
                let nv = mesh.vertex_count();
                let (h, w, d) = (3, 3, 6);
                let px = |i: usize| Pixel::new(i / w, i % w);
                let cross: Vec<(Pixel, Pixel)> =
                    (0..4).map(|_| (px(rng.random_range(0..h * w)), px(rng.random_range(0..h * w)))).collect();
                let same: Vec<SameImagePair> = (0..6)
                    .map(|_| {
                        let a = rng.random_range(0..h * w);
                        let b = (a + rng.random_range(1..h * w)) % (h * w);
                        SameImagePair {
                            image: rng.random_range(0..2),
                            p1: px(a),
                            p2: px(b),
                            v1: rng.random_range(0..nv),
                            v2: rng.random_range(0..nv),
                        }
                    })
                    .collect();
                let sources: Vec<usize> = same.iter().map(|s| s.v1).collect();
                let cache = GeodesicCache::for_mesh(&mesh, &sources)?;
                let g_max = cache.g_max();
                let mask = Mask::filled(h, w, true);
                let n = h * w * d;
                let x = randn(&mut rng, 2 * n, 1.0);
                let f: Objective = Box::new(move |p| {
                    let f0 = EmbeddingField::new(d, p[..n].to_vec(), mask.clone())?;
                    let f1 = EmbeddingField::new(d, p[n..].to_vec(), mask.clone())?;
                    let r = loss_consistency((&f0, &f1), &cross, &same, &cache, g_max)?;
                    Ok((r.value, [r.gradient("field0"), r.gradient("field1")].concat()))
                });
                Ok(GradProblem { x, f })
            }
            GradTarget::Id => {
                let (batch, classes) = (8, 13);
                let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
                let x = randn(&mut rng, batch * classes, 2.0);
                let f: Objective = Box::new(move |p| {
                    let r = loss_id(p, classes, &labels)?;
                    Ok((r.value, r.gradient("logits").to_vec()))
                });
                Ok(GradProblem { x, f })
            }
            GradTarget::TripletActive | GradTarget::TripletInactive => {
                let (ids, per, dim) = (4, 3, 10);
                let labels: Vec<usize> = (0..ids * per).map(|i| i / per).collect();
                let active = self == GradTarget::TripletActive;
                let (margin, spread) = if active { (50.0, 1.0) } else { (0.3, 0.05) };
                let centers = randn(&mut rng, ids * dim, 10.0);
                let x: Vec<f64> = labels
                    .iter()
                    .flat_map(|&l| {
                        let c = centers[l * dim..(l + 1) * dim].to_vec();
                        let noise = randn(&mut rng, dim, spread);
                        c.into_iter().zip(noise).map(|(a, b)| a + b).collect::<Vec<_>>()
                    })
                    .collect();
                let f: Objective = Box::new(move |p| {
                    let r = loss_triplet(p, dim, &labels, margin)?;
                    Ok((r.value, r.gradient("features").to_vec()))
                });
                Ok(GradProblem { x, f })
            }
            GradTarget::Lcp => {
                let (h, w, c) = (4, 3, 4);
                let n = h * w * c;
                let enc = LatentEncoder::new((h, w, c), randn(&mut rng, c * n, 1.0 / (n as f64).sqrt()), true)?;
                let kn = 9 * c * c;
                let weights = randn(&mut rng, n, 1.0);
                let x = [randn(&mut rng, n, 1.0), randn(&mut rng, kn, 0.3)].concat();
                let f: Objective = Box::new(move |p| {
                    let fm = TokenMap::new(h, w, c, p[..n].to_vec())?;
                    let kernel = ConvKernel::new(3, c, c, p[n..].to_vec())?;
                    let out = lcp_project(&fm, &enc, &kernel)?;
                    let g = lcp_backward(&fm, &enc, &kernel, &weights)?;
                    Ok((dot(&out, &weights), [g.input, g.kernel].concat()))
                });
                Ok(GradProblem { x, f })
            }
            GradTarget::Mha => {
                let (c, heads, nq, nk) = (8, 2, 5, 6);
                let r = randn(&mut rng, nq * c, 1.0);
                let sizes = [nq * c, nk * c, nk * c, c * c, c];
                let x: Vec<f64> = sizes.iter().flat_map(|&s| randn(&mut rng, s, 1.0)).collect();
                let f: Objective = Box::new(move |p| {
                    let mut parts = Vec::new();
                    let mut rest = p;
                    for s in sizes {
                        let (a, b) = rest.split_at(s);
                        parts.push(a);
                        rest = b;
                    }
                    let proj = OutputProjection::new(c, parts[3].to_vec(), parts[4].to_vec())?;
                    let fwd = mha(parts[0], parts[1], parts[2], c, heads, &proj)?;
                    let g = mha_backward(parts[0], parts[1], parts[2], c, heads, &proj, &fwd, &r)?;
                    Ok((dot(&fwd.out, &r), [g.q, g.k, g.v, g.weight, g.bias].concat()))
                });
                Ok(GradProblem { x, f })
            }
            GradTarget::CrossFuse => {
                let (h, w, c, heads) = (2, 3, 4, 2);
                let n = h * w * c;
                let encoder = |rng: &mut Rng| LatentEncoder::new((h, w, c), randn(rng, c * n, 1.0 / (n as f64).sqrt()), true);
                let encoders = (encoder(&mut rng)?, encoder(&mut rng)?);
                let base = FusionParams::random(encoders, heads, 3, rng.random(), false)?;
                let r = randn(&mut rng, 2 * n + 2 * c, 1.0);
                let split = base.g.trainable().len();
                let x = [randn(&mut rng, 2 * n, 1.0), base.g.trainable(), base.s.trainable()].concat();
                let f: Objective = Box::new(move |p| {
                    let fg = TokenMap::new(h, w, c, p[..n].to_vec())?;
                    let fs = TokenMap::new(h, w, c, p[n..2 * n].to_vec())?;
                    let mut params = base.clone();
                    params.g.set_trainable(&p[2 * n..2 * n + split])?;
                    params.s.set_trainable(&p[2 * n + split..])?;
                    let out = cross_fuse(&fg, &fs, &params)?;
                    let value = dot(&[out.fg.data(), out.fs.data(), &out.cls[0], &out.cls[1]].concat(), &r);
                    let d_cls = [&r[2 * n..2 * n + c], &r[2 * n + c..]];
                    let g = cross_fuse_backward(&fg, &fs, &params, &r[..n], &r[n..2 * n], d_cls)?;
                    Ok((value, [g.fg, g.fs, g.g.flatten(), g.s.flatten()].concat()))
                });
                Ok(GradProblem { x, f })
            }
        }
    }

    /// Central-difference check of a fresh instance.
    pub fn check(self, seed: u64) -> Result<GradCheck> {
        let p = self.problem(seed)?;
        check_gradient(&p.f, &p.x, DEFAULT_STEP, seed)
    }
}
