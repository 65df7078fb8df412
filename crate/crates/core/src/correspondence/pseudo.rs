use std::collections::BTreeMap;

use rand::Rng as _;

use super::{project_vertices, Camera, Correspondence, CorrespondenceSet, Mask, Pixel, Projection};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::rng::stage_rng;

/// Inclusive range of correspondence counts per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }
}

impl Default for CountRange {
    fn default() -> Self {
        Self { min: 80, max: 125 }
    }
}

/// Labels attached to a generated set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ImageMeta {
    pub image: String,
    pub pid: i64,
    pub cam: i64,
    pub clothes: i64,
}

/// Keeps, per pixel, the visible vertex with the smallest depth. Depth ties
/// go to the lower vertex index.
pub fn zbuffer(projections: &[Projection]) -> BTreeMap<Pixel, (f64, usize)> {
    let mut buf: BTreeMap<Pixel, (f64, usize)> = BTreeMap::new();
    for (v, p) in projections.iter().enumerate().filter(|(_, p)| p.visible) {
        buf.entry(p.pixel)
            .and_modify(|best| {
                if p.depth < best.0 {
                    *best = (p.depth, v);
                }
            })
            .or_insert((p.depth, v));
    }
    buf
}

/// Projects the mesh, resolves pixel conflicts by depth, keeps pixels inside
/// `mask`, and samples a count drawn from `count` without replacement.
///
/// Entries come out in row-major pixel order. The result depends only on the
/// inputs and `seed`.
pub fn generate_pseudo_correspondences(
    mesh: &TriangleMesh,
    camera: &Camera,
    mask: &Mask,
    count: CountRange,
    meta: &ImageMeta,
    seed: u64,
) -> Result<CorrespondenceSet> {
    if mask.count() == 0 {
        return Err(Error::Empty("foreground mask is empty".into()));
    }
    if count.min == 0 || count.min > count.max {
        return Err(Error::Argument(format!("bad count range [{}, {}]", count.min, count.max)));
    }
    let projections = project_vertices(mesh, camera, mask.height, mask.width)?;
    let candidates: Vec<Correspondence> = zbuffer(&projections)
        .into_iter()
        .filter(|(px, _)| mask.get(*px))
        .map(|(pixel, (_, vertex))| Correspondence { pixel, vertex })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Empty("no projected vertex falls inside the mask".into()));
    }
    let mut rng = stage_rng(seed, "pseudo-correspondences");
    let n = rng.random_range(count.min..=count.max);
    if n > candidates.len() {
        return Err(Error::InsufficientCandidates { requested: n, available: candidates.len() });
    }
    let mut picked = rand::seq::index::sample(&mut rng, candidates.len(), n).into_vec();
    picked.sort_unstable();
    Ok(CorrespondenceSet {
        image: meta.image.clone(),
        height: mask.height,
        width: mask.width,
        pid: meta.pid,
        cam: meta.cam,
        clothes: meta.clothes,
        entries: picked.into_iter().map(|i| candidates[i]).collect(),
        cross_view: Vec::new(),
    })
}
