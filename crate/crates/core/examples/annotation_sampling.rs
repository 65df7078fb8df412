//! Samples annotation pixels on a synthetic part map: uniform pixels over
//! the whole body plus k-means centroids per part.
//!
//! cargo run --example annotation_sampling

use std::collections::BTreeMap;

use surfcorr::correspondence::{part_centroid_counts, sample_annotation_pixels, AnnotationSampling};
use surfcorr::io::GrayImage;

/// Three stacked rectangles of decreasing size on a 48x32 canvas.
fn part_map() -> GrayImage {
    let (h, w) = (48, 32);
    let mut pixels = vec![0u8; h * w];
    for row in 0..h {
        for col in 0..w {
            pixels[row * w + col] = match row {
                2..=13 if (10..22).contains(&col) => 1,
                14..=33 if (6..26).contains(&col) => 2,
                34..=45 if (11..21).contains(&col) => 3,
                _ => 0,
            };
        }
    }
    GrayImage { height: h, width: w, pixels }
}

fn main() -> surfcorr::Result<()> {
    let parts = part_map();
    let mut areas = BTreeMap::new();
    for &p in parts.pixels.iter().filter(|&&p| p != 0) {
        *areas.entry(p).or_insert(0usize) += 1;
    }
    let cfg = AnnotationSampling::default();
    let counts = part_centroid_counts(&areas, cfg.k_min, cfg.k_max);
    for (part, area) in &areas {
        println!("part {part}: {area:>4} pixels -> {} centroids", counts[part]);
    }

    let pixels = sample_annotation_pixels(&parts, cfg, 0)?;
    println!("{} annotation pixels ({} uniform)", pixels.len(), cfg.uniform_n);

    // draw the sample over the part map
    let mut canvas: Vec<Vec<char>> = (0..parts.height)
        .map(|r| (0..parts.width).map(|c| if parts.pixels[r * parts.width + c] == 0 { ' ' } else { '.' }).collect())
        .collect();
    for (i, p) in pixels.iter().enumerate() {
        canvas[p.row][p.col] = if i < cfg.uniform_n { 'u' } else { 'C' };
    }
    for line in canvas.iter().step_by(2) {
        println!("|{}|", line.iter().collect::<String>());
    }
    Ok(())
}
