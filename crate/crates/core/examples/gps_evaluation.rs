//! Scores vertex predictions with geodesic point similarity and builds the
//! AP/AR table over thresholds.
//!
//! cargo run --example gps_evaluation

use surfcorr::correspondence::{Correspondence, CorrespondenceSet, Pixel};
use surfcorr::embedding::VertexMap;
use surfcorr::geodesics::GeodesicCache;
use surfcorr::mesh::{make_test_mesh, TestMesh};
use surfcorr::metrics::{gps_ap_ar, GpsConfig};

fn main() -> surfcorr::Result<()> {
    let mesh = make_test_mesh(TestMesh::Grid(6))?;
    let (h, w) = (6, 6);
    let vertex_of = |r: usize, c: usize| r * 6 + c;
    let sources: Vec<usize> = (0..36).collect();
    let cache = GeodesicCache::for_mesh(&mesh, &sources)?;

    let gt = |name: &str| CorrespondenceSet {
        image: name.into(),
        height: h,
        width: w,
        pid: 0,
        cam: 0,
        clothes: 0,
        entries: (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).map(|(r, c)| Correspondence { pixel: Pixel::new(r, c), vertex: vertex_of(r, c) }).collect(),
        cross_view: vec![],
    };
    // predictions shifted by `k` columns, clamped at the border
    let shifted = |k: usize| VertexMap {
        height: h,
        width: w,
        data: (0..h).flat_map(|r| (0..w).map(move |c| Some(vertex_of(r, (c + k).min(w - 1))))).collect(),
    };

    let data = vec![(gt("exact"), Some(shifted(0))), (gt("off-by-one"), Some(shifted(1))), (gt("off-by-two"), Some(shifted(2))), (gt("missing"), None)];
    let table = gps_ap_ar(&data, &cache, &GpsConfig::default())?;
    for ((set, _), score) in data.iter().zip(&table.scores) {
        match score {
            Some(s) => println!("{:<11} GPS {s:.4}", set.image),
            None => println!("{:<11} no prediction", set.image),
        }
    }
    print!("{}", table.to_csv());
    Ok(())
}
