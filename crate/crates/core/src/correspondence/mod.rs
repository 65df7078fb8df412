//! 2D-3D correspondences: pseudo-correspondences from mesh projection,
//! annotation-style pixel sampling, cross-view links and JSONL persistence.

mod annotate;
mod camera;
mod jsonl;
pub mod kmeans;
mod pseudo;

pub use annotate::{part_centroid_counts, sample_annotation_pixels, AnnotationSampling};
pub use camera::{project_vertices, Camera, Projection};
pub use jsonl::{encode_corrs, read_corrs, write_corrs, CorrReader};
pub use kmeans::{kmeans, KMeans};
pub use pseudo::{generate_pseudo_correspondences, zbuffer, CountRange, ImageMeta};

use crate::error::{Error, Result};
use crate::io::GrayImage;

/// Integer image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// A pixel and the mesh vertex it sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Correspondence {
    pub pixel: Pixel,
    pub vertex: usize,
}

/// A local pixel linked to a pixel of another image of the same person;
/// both see the same vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrossViewLink {
    pub local: Pixel,
    pub partner_image: String,
    pub partner: Pixel,
}

/// Correspondences annotated on a single image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrespondenceSet {
    pub image: String,
    pub height: usize,
    pub width: usize,
    pub pid: i64,
    pub cam: i64,
    pub clothes: i64,
    pub entries: Vec<Correspondence>,
    pub cross_view: Vec<CrossViewLink>,
}

impl CorrespondenceSet {
    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.row < self.height && p.col < self.width
    }

    /// Checks pixel bounds and, when a vertex count is given, vertex range.
    pub fn validate(&self, vertex_count: Option<usize>) -> Result<()> {
        for e in &self.entries {
            if !self.in_bounds(e.pixel) {
                return Err(Error::Argument(format!(
                    "{}: pixel {:?} outside {}x{}",
                    self.image, e.pixel, self.height, self.width
                )));
            }
            if let Some(n) = vertex_count {
                if e.vertex >= n {
                    return Err(Error::IndexOutOfRange { index: e.vertex, len: n });
                }
            }
        }
        for l in &self.cross_view {
            if !self.in_bounds(l.local) {
                return Err(Error::Argument(format!("{}: link pixel {:?} out of bounds", self.image, l.local)));
            }
        }
        Ok(())
    }

    /// The vertex annotated at `pixel`, if any (first match).
    pub fn vertex_at(&self, pixel: Pixel) -> Option<usize> {
        self.entries.iter().find(|e| e.pixel == pixel).map(|e| e.vertex)
    }
}

/// Binary foreground mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!("mask {height}x{width} needs {} values, got {}", height * width, data.len())));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    /// Nonzero pixels are foreground.
    pub fn from_image(img: &GrayImage) -> Self {
        Self { height: img.height, width: img.width, data: img.pixels.iter().map(|&p| p != 0).collect() }
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            pixels: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn get(&self, p: Pixel) -> bool {
        p.row < self.height && p.col < self.width && self.data[p.row * self.width + p.col]
    }

    pub fn set(&mut self, p: Pixel, value: bool) {
        self.data[p.row * self.width + p.col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Foreground pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.data.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| Pixel::new(i / w, i % w))
    }
}

/// Summary of a [`link_cross_view`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkReport {
    pub requested: usize,
    pub linked: usize,
}

/// Links up to `n` pixel pairs of `a` and `b` that see the same vertex,
/// lowest vertex indices first. Links are recorded on both sets.
pub fn link_cross_view(a: &mut CorrespondenceSet, b: &mut CorrespondenceSet, n: usize) -> Result<LinkReport> {
    if a.pid != b.pid {
        return Err(Error::Argument(format!(
            "cannot link {} (person {}) with {} (person {})",
            a.image, a.pid, b.image, b.pid
        )));
    }
    let first_pixel = |s: &CorrespondenceSet| {
        let mut m = std::collections::BTreeMap::new();
        for e in &s.entries {
            m.entry(e.vertex).or_insert(e.pixel);
        }
        m
    };
    let (ma, mb) = (first_pixel(a), first_pixel(b));
    let shared: Vec<(Pixel, Pixel)> =
        ma.iter().filter_map(|(v, &pa)| mb.get(v).map(|&pb| (pa, pb))).take(n).collect();
    for &(pa, pb) in &shared {
        let la = CrossViewLink { local: pa, partner_image: b.image.clone(), partner: pb };
        if !a.cross_view.contains(&la) {
            a.cross_view.push(la);
        }
        let lb = CrossViewLink { local: pb, partner_image: a.image.clone(), partner: pa };
        if !b.cross_view.contains(&lb) {
            b.cross_view.push(lb);
        }
    }
    Ok(LinkReport { requested: n, linked: shared.len() })
}
