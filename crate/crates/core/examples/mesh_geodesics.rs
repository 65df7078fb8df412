//! Builds an icosphere, checks its edge graph and prints a few geodesic
//! distances next to the straight-line chord.
//!
//! cargo run --example mesh_geodesics -- [level]

use surfcorr::geodesics::{geodesic_from, scale, GeodesicCache};
use surfcorr::mesh::{make_test_mesh, parse_obj, to_obj_string, TestMesh};

fn main() -> surfcorr::Result<()> {
    let level: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mesh = make_test_mesh(TestMesh::Icosphere(level))?;
    let graph = mesh.edge_graph();
    println!(
        "icosphere({level}): {} vertices, {} faces, {} edges, {} component(s)",
        mesh.vertex_count(),
        mesh.face_count(),
        graph.edge_count(),
        graph.component_count()
    );

    let again = parse_obj(&to_obj_string(&mesh))?;
    println!("OBJ round trip keeps faces: {}", again.faces() == mesh.faces());

    let row = geodesic_from(&graph, 0)?;
    let p0 = mesh.vertices()[0];
    println!("{:>6} {:>10} {:>10} {:>8}", "vertex", "geodesic", "chord", "scaled");
    let g_max = row.iter().cloned().fold(0.0, f64::max);
    for v in (0..mesh.vertex_count()).step_by(mesh.vertex_count() / 8) {
        let q = mesh.vertices()[v];
        let chord = ((p0[0] - q[0]).powi(2) + (p0[1] - q[1]).powi(2) + (p0[2] - q[2]).powi(2)).sqrt();
        println!("{v:>6} {:>10.5} {chord:>10.5} {:>8.4}", row[v], scale(row[v], g_max)?);
    }
    // the graph path overestimates the true arc, which is pi on the unit sphere
    println!("farthest vertex: {g_max:.5} (great-circle half turn is {:.5})", std::f64::consts::PI);

    let cache = GeodesicCache::for_mesh(&mesh, &[0, 1, 2])?;
    println!("cache: {} sources, g_max {:.5}", cache.sources().len(), cache.g_max());
    Ok(())
}
