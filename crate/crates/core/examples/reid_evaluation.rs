//! Retrieval evaluation on synthetic features under the standard,
//! cloth-changing and same-clothes protocols.
//!
//! cargo run --example reid_evaluation

use surfcorr::metrics::{reid_eval, Protocol, RetrievalInstance, SampleLabels};
use surfcorr::rng::{normal, stage_rng};

fn main() -> surfcorr::Result<()> {
    let dim = 16;
    let mut rng = stage_rng(0, "reid-example");
    let ids = 8;
    let centers: Vec<Vec<f64>> = (0..ids).map(|_| (0..dim).map(|_| normal(&mut rng)).collect()).collect();
    // an outfit shifts the feature, so cloth changes are harder to match
    let outfits: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| 0.8 * normal(&mut rng)).collect()).collect();
    let mut sample = |id: usize, clothes: usize, out: &mut Vec<f64>| {
        out.extend((0..dim).map(|j| centers[id][j] + outfits[clothes][j] + 0.3 * normal(&mut rng)));
    };

    let (mut query, mut gallery, mut ql, mut gl) = (vec![], vec![], vec![], vec![]);
    for id in 0..ids {
        sample(id, 0, &mut query);
        ql.push(SampleLabels { id: id as i64, cam: 0, clothes: 0 });
        for (cam, clothes) in [(1, 0), (2, 1), (3, 1)] {
            sample(id, clothes, &mut gallery);
            gl.push(SampleLabels { id: id as i64, cam, clothes: clothes as i64 });
        }
    }

    println!("{:<15} {:>6} {:>7} {:>7} {:>9}", "protocol", "mAP", "rank-1", "rank-5", "evaluated");
    for protocol in Protocol::ALL {
        let inst = RetrievalInstance {
            dim,
            query: query.clone(),
            query_labels: ql.clone(),
            gallery: gallery.clone(),
            gallery_labels: gl.clone(),
            protocol,
        };
        let r = reid_eval(&inst)?;
        println!(
            "{:<15} {:>6.1} {:>7.1} {:>7.1} {:>9}",
            protocol.name(),
            100.0 * r.map,
            100.0 * r.rank(1),
            100.0 * r.rank(5),
            r.evaluated
        );
    }
    Ok(())
}
