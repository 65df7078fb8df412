//! Triangle meshes and their weighted edge graph.

mod obj;
mod shapes;

pub use obj::{load_mesh, parse_obj, to_obj_string, write_mesh};
pub use shapes::{make_test_mesh, TestMesh};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Faces with area below this are rejected as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

pub type Point3 = [f64; 3];

/// A validated triangle mesh. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds and validates a mesh.
    ///
    /// Rejects out-of-range indices, faces with repeated indices, faces with
    /// area below [`DEGENERATE_AREA`], and meshes whose edge graph is not
    /// connected (unreferenced vertices count as separate components).
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::Validation("mesh needs at least one vertex and one face".into()));
        }
        if let Some(v) = vertices.iter().flatten().find(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("non-finite vertex coordinate {v}")));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&i) = f.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::Validation(format!(
                    "face {fi} references vertex {i}, mesh has {}",
                    vertices.len()
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Validation(format!("face {fi} repeats a vertex index: {f:?}")));
            }
            let area = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
            if area < DEGENERATE_AREA {
                return Err(Error::Validation(format!("face {fi} is degenerate (area {area:e})")));
            }
        }
        let mesh = Self { vertices, faces };
        let components = mesh.edge_graph().component_count();
        if components != 1 {
            return Err(Error::Validation(format!("edge graph has {components} connected components")));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// SHA-256 over the vertex coordinates and face indices.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in v {
                h.update(c.to_le_bytes());
            }
        }
        h.update((self.faces.len() as u64).to_le_bytes());
        for f in &self.faces {
            for &i in f {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.finalize().into()
    }

    /// One undirected edge per face-adjacent vertex pair, weighted by
    /// Euclidean length.
    pub fn edge_graph(&self) -> EdgeGraph {
        let n = self.vertices.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                adjacency[a].push((b, 0.0));
                adjacency[b].push((a, 0.0));
            }
        }
        for (u, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_by_key(|&(v, _)| v);
            nbrs.dedup_by_key(|&mut (v, _)| v);
            for (v, w) in nbrs.iter_mut() {
                *w = distance(&self.vertices[u], &self.vertices[*v]);
            }
        }
        EdgeGraph { adjacency }
    }
}

pub fn build_edge_graph(mesh: &TriangleMesh) -> EdgeGraph {
    mesh.edge_graph()
}

/// Symmetric weighted adjacency lists, neighbors sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl EdgeGraph {
    /// Builds a graph directly from undirected weighted edges.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vertex_count];
        for &(u, v, w) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::IndexOutOfRange { index: u.max(v), len: vertex_count });
            }
            if u == v || !(w > 0.0) || !w.is_finite() {
                return Err(Error::Argument(format!("bad edge ({u}, {v}, {w})")));
            }
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            nbrs.dedup_by_key(|&mut (v, _)| v);
        }
        Ok(Self { adjacency })
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&(v, _)| u < v).map(move |&(v, w)| (u, v, w)))
    }

    pub fn component_count(&self) -> usize {
        let n = self.adjacency.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }
}

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> TriangleMesh {
        make_test_mesh(TestMesh::Tetrahedron).unwrap()
    }

    #[test]
    fn tetrahedron_graph_is_k4_with_unit_weights() {
        let g = tetra().edge_graph();
        assert_eq!(g.edge_count(), 6);
        for (_, _, w) in g.edges() {
            assert!((w - 1.0).abs() < 1e-12, "weight {w}");
        }
    }

    #[test]
    fn icosphere_level1_has_120_edges() {
        let mesh = make_test_mesh(TestMesh::Icosphere(1)).unwrap();
        assert_eq!(mesh.vertex_count(), 42);
        assert_eq!(mesh.face_count(), 80);
        // brute force: collect sorted pairs from all faces
        let mut pairs = std::collections::BTreeSet::new();
        for f in mesh.faces() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(pairs.len(), 120);
        assert_eq!(mesh.edge_graph().edge_count(), 120);
    }

    #[test]
    fn graph_is_symmetric() {
        let g = make_test_mesh(TestMesh::Icosphere(2)).unwrap().edge_graph();
        for u in 0..g.vertex_count() {
            for &(v, w) in g.neighbors(u) {
                assert!(g.neighbors(v).iter().any(|&(x, w2)| x == u && w2 == w));
            }
        }
    }

    #[test]
    fn rejects_disconnected() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [5.0, 0.0, 0.0],
            [6.0, 0.0, 0.0],
            [5.0, 1.0, 0.0],
        ];
        let err = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap_err();
        assert!(err.to_string().contains("2 connected components"), "{err}");
    }

    #[test]
    fn rejects_unreferenced_vertex() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [9.0, 9.0, 9.0]];
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn rejects_degenerate_and_repeated() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(matches!(TriangleMesh::new(v.clone(), vec![[0, 1, 2]]), Err(Error::Validation(_))));
        assert!(matches!(TriangleMesh::new(v.clone(), vec![[0, 1, 1]]), Err(Error::Validation(_))));
        assert!(matches!(TriangleMesh::new(v, vec![[0, 1, 3]]), Err(Error::Validation(_))));
    }

    #[test]
    fn tiny_but_valid_area_passes() {
        // area 5e-12 sits just above the cutoff
        let v = vec![[0.0, 0.0, 0.0], [1e-5, 0.0, 0.0], [0.0, 1e-6, 0.0]];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).is_ok());
        let v2 = vec![[0.0, 0.0, 0.0], [1e-6, 0.0, 0.0], [0.0, 1e-6, 0.0]];
        assert!(TriangleMesh::new(v2, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = tetra();
        let mut v = a.vertices().to_vec();
        v[0][0] += 1e-9;
        let b = TriangleMesh::new(v, a.faces().to_vec()).unwrap();
        assert_eq!(a.content_hash(), tetra().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
