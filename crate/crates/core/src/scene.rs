//! Synthetic scenes: a mesh seen by two cameras, with masks and pseudo
//! correspondences that are consistent by construction.
//!
//! On disk a scene is a directory holding `mesh.obj`, `cameras.json`,
//! one `mask_<image>.pgm` per view and `corrs.jsonl`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correspondence::{
    generate_pseudo_correspondences, link_cross_view, project_vertices, read_corrs, write_corrs, zbuffer, Camera,
    Correspondence, CorrespondenceSet, CountRange, ImageMeta, Mask, Pixel,
};
use crate::error::{Error, Result};
use crate::io::{read_pgm, write_atomic, write_pgm};
use crate::mesh::{load_mesh, make_test_mesh, write_mesh, TestMesh, TriangleMesh};

/// Links per image pair.
pub const CROSS_VIEW_LINKS: usize = 10;

/// Radius of the sphere scene. Its area, about 1.8 square units, matches an
/// adult body surface in square meters, the scale GPS sigma is meant for.
pub const SPHERE_RADIUS: f64 = 0.38;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Icosphere (642 vertices, radius [`SPHERE_RADIUS`]) seen by two
    /// pinhole cameras 60 degrees apart.
    Sphere,
    /// 16x16 planar grid seen by two orthographic cameras.
    TwoViewGrid,
}

impl std::str::FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(SceneKind::Sphere),
            "twoview-grid" => Ok(SceneKind::TwoViewGrid),
            other => Err(Error::Argument(format!("unknown scene kind {other:?} (sphere | twoview-grid)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub image: String,
    pub camera: Camera,
    #[serde(skip)]
    pub mask: Option<Mask>,
    pub height: usize,
    pub width: usize,
}

impl View {
    pub fn mask(&self) -> &Mask {
        self.mask.as_ref().expect("scene views always carry a mask")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub mesh: TriangleMesh,
    pub views: Vec<View>,
    pub sets: Vec<CorrespondenceSet>,
}

fn rot_y(deg: f64) -> [[f64; 3]; 3] {
    let (s, c) = deg.to_radians().sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

/// Pixels whose center ray through a pinhole camera hits the sphere of
/// radius `r` at the origin.
fn sphere_mask(camera: &Camera, r: f64, h: usize, w: usize) -> Mask {
    let Camera::Pinhole { focal, cx, cy, translation: t, .. } = camera else {
        unreachable!("sphere scenes use pinhole cameras")
    };
    // sphere center in camera coordinates is t
    let mut mask = Mask::filled(h, w, false);
    for row in 0..h {
        for col in 0..w {
            let dir = [(col as f64 + 0.5 - cx) / focal, (row as f64 + 0.5 - cy) / focal, 1.0];
            let dd: f64 = dir.iter().map(|x| x * x).sum();
            let dc: f64 = dir.iter().zip(t).map(|(a, b)| a * b).sum();
            let cc: f64 = t.iter().map(|x| x * x).sum();
            if dc * dc - dd * (cc - r * r) >= 0.0 {
                mask.set(Pixel::new(row, col), true);
            }
        }
    }
    mask
}

/// Pixels inside the projected unit square of an orthographic camera.
fn grid_mask(camera: &Camera, h: usize, w: usize) -> Mask {
    let Camera::ScaledOrthographic { scale, tx, ty } = *camera else {
        unreachable!("grid scenes use orthographic cameras")
    };
    let mut mask = Mask::filled(h, w, false);
    for row in 0..h {
        for col in 0..w {
            let inside = |v: usize, t: f64| {
                let x = (v as f64 + 0.5 - t) / scale;
                (-0.02..=1.02).contains(&x)
            };
            if inside(row, ty) && inside(col, tx) {
                mask.set(Pixel::new(row, col), true);
            }
        }
    }
    mask
}

/// Builds a two-view scene. Each image receives 80 to 115 sampled
/// correspondences, then shared vertices are topped up so the pair carries
/// exactly [`CROSS_VIEW_LINKS`] links; entry counts stay within 80 to 125.
pub fn synth_scene(kind: SceneKind, seed: u64) -> Result<Scene> {
    let (mesh, views) = match kind {
        SceneKind::Sphere => {
            let unit = make_test_mesh(TestMesh::Icosphere(3))?;
            let scaled = unit.vertices().iter().map(|p| p.map(|x| x * SPHERE_RADIUS)).collect();
            let mesh = TriangleMesh::new(scaled, unit.faces().to_vec())?;
            let (h, w) = (64, 64);
            let views = [0.0, 60.0]
                .iter()
                .enumerate()
                .map(|(i, &deg)| {
                    let camera = Camera::Pinhole {
                        focal: 100.0,
                        cx: w as f64 / 2.0,
                        cy: h as f64 / 2.0,
                        rotation: rot_y(deg),
                        translation: [0.0, 0.0, 4.0 * SPHERE_RADIUS],
                    };
                    let mask = sphere_mask(&camera, SPHERE_RADIUS, h, w);
                    View { image: format!("sphere_v{i}"), camera, mask: Some(mask), height: h, width: w }
                })
                .collect::<Vec<_>>();
            (mesh, views)
        }
        SceneKind::TwoViewGrid => {
            let mesh = make_test_mesh(TestMesh::Grid(16))?;
            let (h, w) = (48, 48);
            let views = [(40.0, 4.0, 4.0), (36.0, 6.0, 5.0)]
                .iter()
                .enumerate()
                .map(|(i, &(scale, tx, ty))| {
                    let camera = Camera::ScaledOrthographic { scale, tx, ty };
                    let mask = grid_mask(&camera, h, w);
                    View { image: format!("grid_v{i}"), camera, mask: Some(mask), height: h, width: w }
                })
                .collect::<Vec<_>>();
            (mesh, views)
        }
    };

    let mut sets = Vec::with_capacity(views.len());
    for (i, view) in views.iter().enumerate() {
        let meta = ImageMeta { image: view.image.clone(), pid: 0, cam: i as i64, clothes: 0 };
        let view_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
        sets.push(generate_pseudo_correspondences(
            &mesh,
            &view.camera,
            view.mask(),
            CountRange::new(80, 125 - CROSS_VIEW_LINKS),
            &meta,
            view_seed,
        )?);
    }
    top_up_shared(&mesh, &views, &mut sets)?;
    let (a, b) = sets.split_at_mut(1);
    let report = link_cross_view(&mut a[0], &mut b[0], CROSS_VIEW_LINKS)?;
    if report.linked != CROSS_VIEW_LINKS {
        return Err(Error::InsufficientCandidates { requested: CROSS_VIEW_LINKS, available: report.linked });
    }
    Ok(Scene { mesh, views, sets })
}

/// Adds z-buffer-visible vertices to both sets until they share at least
/// [`CROSS_VIEW_LINKS`] vertices.
fn top_up_shared(mesh: &TriangleMesh, views: &[View], sets: &mut [CorrespondenceSet]) -> Result<()> {
    let visible: Vec<std::collections::BTreeMap<usize, Pixel>> = views
        .iter()
        .map(|v| -> Result<_> {
            let proj = project_vertices(mesh, &v.camera, v.height, v.width)?;
            Ok(zbuffer(&proj)
                .into_iter()
                .filter(|(px, _)| v.mask().get(*px))
                .map(|(px, (_, vert))| (vert, px))
                .collect())
        })
        .collect::<Result<_>>()?;
    let verts = |s: &CorrespondenceSet| s.entries.iter().map(|e| e.vertex).collect::<BTreeSet<_>>();
    let shared = verts(&sets[0]).intersection(&verts(&sets[1])).count();
    let mut need = CROSS_VIEW_LINKS.saturating_sub(shared);
    for &v in visible[0].keys() {
        if need == 0 {
            break;
        }
        if !visible[1].contains_key(&v) {
            continue;
        }
        let (in0, in1) = (verts(&sets[0]).contains(&v), verts(&sets[1]).contains(&v));
        if in0 && in1 {
            continue;
        }
        for (k, present) in [(0, in0), (1, in1)] {
            if !present {
                sets[k].entries.push(Correspondence { pixel: visible[k][&v], vertex: v });
                sets[k].entries.sort_by_key(|e| e.pixel);
            }
        }
        need -= 1;
    }
    Ok(())
}

impl Scene {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_mesh(&dir.join("mesh.obj"), &self.mesh)?;
        let cams = serde_json::to_vec_pretty(&self.views)?;
        write_atomic(&dir.join("cameras.json"), &cams)?;
        for v in &self.views {
            write_pgm(&dir.join(format!("mask_{}.pgm", v.image)), &v.mask().to_image())?;
        }
        write_corrs(&dir.join("corrs.jsonl"), &self.sets)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mesh = load_mesh(&dir.join("mesh.obj"))?;
        let mut views: Vec<View> = serde_json::from_slice(&fs::read(dir.join("cameras.json"))?)?;
        for v in &mut views {
            let mask = Mask::from_image(&read_pgm(&dir.join(format!("mask_{}.pgm", v.image)))?);
            if (mask.height, mask.width) != (v.height, v.width) {
                return Err(Error::Shape(format!("mask for {} is {}x{}", v.image, mask.height, mask.width)));
            }
            v.mask = Some(mask);
        }
        let sets = read_corrs(&dir.join("corrs.jsonl"))?;
        for s in &sets {
            s.validate(Some(mesh.vertex_count()))?;
        }
        Ok(Self { mesh, views, sets })
    }

    /// Every vertex annotated in any image.
    pub fn annotated_vertices(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.sets.iter().flat_map(|s| s.entries.iter().map(|e| e.vertex)).collect();
        set.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_scene_has_ten_links_and_bounded_counts() {
        for seed in 0..5 {
            let s = synth_scene(SceneKind::TwoViewGrid, seed).unwrap();
            for set in &s.sets {
                assert_eq!(set.cross_view.len(), CROSS_VIEW_LINKS);
                assert!((80..=125).contains(&set.entries.len()), "{}", set.entries.len());
            }
        }
    }

    #[test]
    fn sphere_scene_is_deterministic() {
        let a = synth_scene(SceneKind::Sphere, 7).unwrap();
        let b = synth_scene(SceneKind::Sphere, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sets, synth_scene(SceneKind::Sphere, 8).unwrap().sets);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = synth_scene(SceneKind::TwoViewGrid, 3).unwrap();
        s.save(dir.path()).unwrap();
        assert_eq!(Scene::load(dir.path()).unwrap(), s);
    }
}
