//! Projects a trained embedding field onto its top principal components and
//! writes it as a colour image.
//!
//! cargo run --release --example pca_visualization -- [out.ppm]

use surfcorr::embedding::pca_project;
use surfcorr::losses::{optimize_embeddings, ToyConfig};
use surfcorr::scene::{synth_scene, SceneKind};

fn main() -> surfcorr::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "pca.ppm".into());
    let scene = synth_scene(SceneKind::Sphere, 0)?;
    let fit = optimize_embeddings(&scene, &ToyConfig { steps: 100, ..ToyConfig::default() })?;
    let field = &fit.fields[0];

    let p = pca_project(field, 3)?;
    let ratios: Vec<String> = p.explained_variance_ratio().iter().map(|r| format!("{r:.3}")).collect();
    println!("{}x{} field, {} dims; explained variance {}", field.height(), field.width(), field.dim(), ratios.join(" "));
    surfcorr::io::write_atomic(std::path::Path::new(&out), &p.to_ppm())?;
    println!("wrote {out}");
    Ok(())
}
