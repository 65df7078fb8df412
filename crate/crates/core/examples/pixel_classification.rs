//! Pixel-to-vertex classification: softmax over scaled cosine similarity
//! between a pixel embedding and every row of the vertex table.
//!
//! cargo run --example pixel_classification

use rand::Rng as _;
use surfcorr::correspondence::{Mask, Pixel};
use surfcorr::embedding::{classify_pixel, predict_vertices, vertex_logits, EmbeddingField, VertexEmbeddingTable};
use surfcorr::rng::{normal, stage_rng};

fn main() -> surfcorr::Result<()> {
    let (rows, dim) = (6, 8);
    let mut rng = stage_rng(0, "example");
    let table: Vec<f64> = (0..rows * dim).map(|_| normal(&mut rng)).collect();
    let table = VertexEmbeddingTable::new(rows, dim, table)?;

    // each pixel copies a table row plus a little noise
    let mask = Mask::filled(2, 3, true);
    let mut field = EmbeddingField::zeros(mask, dim)?;
    for (i, p) in (0..2).flat_map(|r| (0..3).map(move |c| Pixel::new(r, c))).enumerate() {
        let target = (i * 5) % rows;
        for (x, t) in field.at_mut(p).iter_mut().zip(table.row(target)) {
            *x = t + 0.1 * rng.random_range(-1.0..1.0);
        }
    }

    for temperature in [1.0, 0.1] {
        let logits = vertex_logits(field.at(Pixel::new(0, 1)), &table, temperature)?;
        let probs = classify_pixel(&field, Pixel::new(0, 1), &table, temperature)?;
        let shown: Vec<String> = logits.iter().zip(&probs).map(|(z, p)| format!("{z:+.2}/{p:.3}")).collect();
        println!("T={temperature:<4} logit/prob: {}", shown.join("  "));
    }

    let map = predict_vertices(&field, &table)?;
    for r in 0..2 {
        let row: Vec<String> = (0..3).map(|c| format!("{:?}", map.get(Pixel::new(r, c)))).collect();
        println!("row {r}: {}", row.join(" "));
    }
    Ok(())
}
