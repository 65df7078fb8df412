//! Trains a linear autoencoder on random token maps, freezes it and runs
//! bidirectional cross-attention between two modalities.
//!
//! cargo run --release --example cross_fusion

use surfcorr::fusion::{cross_fuse, train_autoencoder, FusionParams, TokenMap, DEFAULT_HEADS, DEFAULT_KERNEL};
use surfcorr::rng::{normal, stage_rng};

fn random_map(h: usize, w: usize, c: usize, seed: u64) -> surfcorr::Result<TokenMap> {
    let mut rng = stage_rng(seed, "tokens");
    TokenMap::new(h, w, c, (0..h * w * c).map(|_| normal(&mut rng)).collect())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> surfcorr::Result<()> {
    let (h, w, c) = (4, 3, 8);
    let appearance: Vec<TokenMap> = (0..6).map(|s| random_map(h, w, c, s)).collect::<surfcorr::Result<_>>()?;
    let shape: Vec<TokenMap> = (10..16).map(|s| random_map(h, w, c, s)).collect::<surfcorr::Result<_>>()?;

    let ae_g = train_autoencoder(&appearance, c, 400, 0.1, 0)?;
    let ae_s = train_autoencoder(&shape, c, 400, 0.1, 1)?;
    println!(
        "autoencoders: reconstruction mse {:.4} -> {:.4} and {:.4} -> {:.4}",
        ae_g.trace[0],
        ae_g.trace[ae_g.trace.len() - 1],
        ae_s.trace[0],
        ae_s.trace[ae_s.trace.len() - 1]
    );

    let (fg, fs) = (&appearance[0], &shape[0]);
    let zero = FusionParams::random((ae_g.encoder.clone(), ae_s.encoder.clone()), DEFAULT_HEADS, DEFAULT_KERNEL, 0, true)?;
    let out = cross_fuse(fg, fs, &zero)?;
    println!("zero output projection: maps unchanged = {}", out.fg == *fg && out.fs == *fs);

    let live = FusionParams::random((ae_g.encoder, ae_s.encoder), DEFAULT_HEADS, DEFAULT_KERNEL, 0, false)?;
    let out = cross_fuse(fg, fs, &live)?;
    println!(
        "random projection: max change {:.4} (appearance) {:.4} (shape)",
        max_abs_diff(out.fg.data(), fg.data()),
        max_abs_diff(out.fs.data(), fs.data())
    );
    println!("class tokens: {:.3?}", &out.cls[0][..4]);
    Ok(())
}
