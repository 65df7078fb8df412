use std::collections::BTreeMap;

use super::{kmeans, Mask, Pixel};
use crate::error::{Error, Result};
use crate::io::GrayImage;
use crate::rng::stage_rng;

/// Pixel sampling parameters: `uniform_n` pixels over the whole foreground
/// plus `k_min..=k_max` k-means centroids per part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotationSampling {
    pub uniform_n: usize,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for AnnotationSampling {
    fn default() -> Self {
        Self { uniform_n: 40, k_min: 5, k_max: 10 }
    }
}

/// Centroid count per part: the part's area relative to the largest part,
/// mapped linearly onto `[k_min, k_max]` and rounded, capped at the area.
pub fn part_centroid_counts(areas: &BTreeMap<u8, usize>, k_min: usize, k_max: usize) -> BTreeMap<u8, usize> {
    let largest = areas.values().copied().max().unwrap_or(0).max(1) as f64;
    areas
        .iter()
        .map(|(&label, &area)| {
            let share = area as f64 / largest;
            let k = (k_min as f64 + (k_max - k_min) as f64 * share).round() as usize;
            (label, k.min(area))
        })
        .collect()
}

/// Samples annotation pixels from a part-label map (0 = background).
///
/// Returns the uniform pixels (row-major order) followed by each part's
/// centroid pixels in ascending label order. Centroids are snapped to the
/// nearest pixel of their part.
pub fn sample_annotation_pixels(parts: &GrayImage, cfg: AnnotationSampling, seed: u64) -> Result<Vec<Pixel>> {
    if cfg.k_min > cfg.k_max {
        return Err(Error::Argument(format!("bad centroid range [{}, {}]", cfg.k_min, cfg.k_max)));
    }
    let fg = Mask::from_image(parts);
    let foreground: Vec<Pixel> = fg.pixels().collect();
    if foreground.is_empty() {
        return Err(Error::Empty("part map has no foreground".into()));
    }
    if cfg.uniform_n > foreground.len() {
        return Err(Error::InsufficientCandidates { requested: cfg.uniform_n, available: foreground.len() });
    }
    let mut rng = stage_rng(seed, "annotation-uniform");
    let mut picked = rand::seq::index::sample(&mut rng, foreground.len(), cfg.uniform_n).into_vec();
    picked.sort_unstable();
    let mut out: Vec<Pixel> = picked.into_iter().map(|i| foreground[i]).collect();

    let mut by_part: BTreeMap<u8, Vec<Pixel>> = BTreeMap::new();
    for &p in &foreground {
        by_part.entry(parts.pixels[p.row * parts.width + p.col]).or_default().push(p);
    }
    let areas = by_part.iter().map(|(&l, px)| (l, px.len())).collect();
    let counts = part_centroid_counts(&areas, cfg.k_min, cfg.k_max);
    for (label, pixels) in &by_part {
        let k = counts[label];
        if k == 0 {
            continue;
        }
        let pts: Vec<[f64; 2]> = pixels.iter().map(|p| [p.row as f64, p.col as f64]).collect();
        let part_seed = seed ^ (u64::from(*label) << 32) ^ 0x5eed;
        let result = kmeans(&pts, k, part_seed)?;
        for c in &result.centroids {
            out.push(snap(c, pixels));
        }
    }
    Ok(out)
}

/// Nearest pixel of `pixels` to `c`; ties go to the earlier pixel.
fn snap(c: &[f64; 2], pixels: &[Pixel]) -> Pixel {
    let mut best = (pixels[0], f64::INFINITY);
    for &p in pixels {
        let d = (p.row as f64 - c[0]).powi(2) + (p.col as f64 - c[1]).powi(2);
        if d < best.1 {
            best = (p, d);
        }
    }
    best.0
}
