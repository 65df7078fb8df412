//! Fits embeddings on the synthetic sphere scene and reports GPS before
//! and after training.
//!
//! cargo run --release --example toy_training -- [steps] [lr] [temperature]

use std::time::Instant;

use surfcorr::embedding::{cosine_distance, predict_vertices};
use surfcorr::geodesics::GeodesicCache;
use surfcorr::losses::{optimize_embeddings, ToyConfig, ToyResult};
use surfcorr::metrics::{gps_ap_ar, GpsConfig};
use surfcorr::scene::{synth_scene, Scene, SceneKind};

fn ap50(scene: &Scene, cache: &GeodesicCache, r: &ToyResult) -> surfcorr::Result<f64> {
    let data = scene
        .sets
        .iter()
        .zip(&r.fields)
        .map(|(s, f)| Ok((s.clone(), Some(predict_vertices(f, &r.table)?))))
        .collect::<surfcorr::Result<Vec<_>>>()?;
    Ok(gps_ap_ar(&data, cache, &GpsConfig::default())?.ap[0])
}

fn linked_distance(scene: &Scene, r: &ToyResult) -> surfcorr::Result<f64> {
    let (a, b) = (&scene.sets[0], &scene.sets[1]);
    let mut sum = 0.0;
    for l in &a.cross_view {
        sum += cosine_distance(r.fields[0].at(l.local), r.fields[1].at(l.partner))?;
    }
    debug_assert_eq!(b.image, a.cross_view[0].partner_image);
    Ok(sum / a.cross_view.len() as f64)
}

fn main() -> surfcorr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let defaults = ToyConfig::default();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let cfg = ToyConfig {
        steps: arg(0, defaults.steps as f64) as usize,
        learning_rate: arg(1, defaults.learning_rate),
        temperature: arg(2, defaults.temperature),
        ..defaults
    };
    let scene = synth_scene(SceneKind::Sphere, 0)?;
    let cache = GeodesicCache::for_mesh(&scene.mesh, &scene.annotated_vertices())?;
    let annotated: usize = scene.sets.iter().map(|s| s.entries.len()).sum();
    println!("sphere scene: {} vertices, {annotated} annotated pixels", scene.mesh.vertex_count());

    let init = optimize_embeddings(&scene, &ToyConfig { steps: 0, ..cfg })?;
    let start = Instant::now();
    let fit = optimize_embeddings(&scene, &cfg)?;
    let elapsed = start.elapsed();

    println!("GPS-AP@0.50  init {:.3}  trained {:.3}", ap50(&scene, &cache, &init)?, ap50(&scene, &cache, &fit)?);
    println!("linked cosine distance  init {:.4}  trained {:.4}", linked_distance(&scene, &init)?, linked_distance(&scene, &fit)?);
    let rises = fit.trace.windows(2).skip(10).filter(|w| w[1] > w[0]).count();
    println!(
        "loss {:.5} -> {:.5}, {} rises after step 10, {} steps in {:.2?}",
        fit.trace[0],
        fit.trace[fit.trace.len() - 1],
        rises,
        cfg.steps,
        elapsed
    );
    Ok(())
}
