use std::collections::HashMap;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};

/// Synthetic fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMesh {
    /// Regular tetrahedron with unit edges.
    Tetrahedron,
    /// Unit-radius icosphere after `level` midpoint subdivisions.
    Icosphere(u32),
    /// `n`×`n` vertex grid on the unit square in the z = 0 plane.
    Grid(usize),
}

pub fn make_test_mesh(kind: TestMesh) -> Result<TriangleMesh> {
    match kind {
        TestMesh::Tetrahedron => tetrahedron(),
        TestMesh::Icosphere(level) => icosphere(level),
        TestMesh::Grid(n) => grid(n),
    }
}

fn tetrahedron() -> Result<TriangleMesh> {
    let s = 1.0 / (2.0 * 2f64.sqrt());
    let v = vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

fn normalize(p: Point3) -> Point3 {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

fn icosphere(level: u32) -> Result<TriangleMesh> {
    if level > 7 {
        return Err(Error::Argument(format!("icosphere level {level} too large")));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Point3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(verts, faces)
}

fn grid(n: usize) -> Result<TriangleMesh> {
    if n < 2 {
        return Err(Error::Argument(format!("grid needs n >= 2, got {n}")));
    }
    let step = 1.0 / (n - 1) as f64;
    let mut verts = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            verts.push([c as f64 * step, r as f64 * step, 0.0]);
        }
    }
    let mut faces = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for r in 0..n - 1 {
        for c in 0..n - 1 {
            let i = r * n + c;
            faces.push([i, i + 1, i + n + 1]);
            faces.push([i, i + n + 1, i + n]);
        }
    }
    TriangleMesh::new(verts, faces)
}
