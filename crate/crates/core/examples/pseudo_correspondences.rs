//! Projects the sphere scene mesh through a pinhole camera, keeps the
//! z-buffer winners inside the mask and samples pseudo-correspondences.
//!
//! cargo run --example pseudo_correspondences -- [seed]

use surfcorr::correspondence::{generate_pseudo_correspondences, project_vertices, zbuffer, CountRange, ImageMeta};
use surfcorr::scene::{synth_scene, SceneKind};

fn main() -> surfcorr::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let scene = synth_scene(SceneKind::Sphere, seed)?;
    let view = &scene.views[0];
    let mask = view.mask();

    let projections = project_vertices(&scene.mesh, &view.camera, view.height, view.width)?;
    let visible = projections.iter().filter(|p| p.visible).count();
    let winners = zbuffer(&projections);
    println!(
        "{}x{} view: {} of {} vertices in frame, {} pixels after the z-buffer, {} foreground pixels",
        view.height,
        view.width,
        visible,
        scene.mesh.vertex_count(),
        winners.len(),
        mask.count()
    );

    let meta = ImageMeta { image: view.image.clone(), pid: 1, cam: 0, clothes: 0 };
    let set = generate_pseudo_correspondences(&scene.mesh, &view.camera, mask, CountRange::default(), &meta, seed)?;
    println!("sampled {} correspondences", set.entries.len());
    for c in set.entries.iter().take(5) {
        println!("  pixel ({:>2}, {:>2}) -> vertex {}", c.pixel.row, c.pixel.col, c.vertex);
    }

    let again = generate_pseudo_correspondences(&scene.mesh, &view.camera, mask, CountRange::default(), &meta, seed)?;
    println!("same seed reproduces the set: {}", again == set);
    println!("scene links between views: {}", scene.sets[0].cross_view.len());
    Ok(())
}
