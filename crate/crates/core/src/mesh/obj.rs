//! Minimal Wavefront OBJ support: `v` and `f` records only.
//!
//! Face corners may carry `/vt/vn` suffixes, which are dropped. Polygons with
//! more than three corners are fan-triangulated. Every other record type is
//! skipped.

use std::fmt::Write as _;
use std::path::Path;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    parse_obj(&std::fs::read_to_string(path)?)
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    crate::io::write_atomic(path, to_obj_string(mesh).as_bytes())
}

pub fn to_obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tok = content.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords: Vec<&str> = tok.collect();
                if coords.len() < 3 || coords.len() > 4 {
                    return Err(Error::Parse { line, msg: format!("vertex needs 3 coordinates, got {}", coords.len()) });
                }
                let mut p = [0.0; 3];
                for (k, c) in coords.iter().take(3).enumerate() {
                    p[k] = c.parse().map_err(|_| Error::Parse { line, msg: format!("bad coordinate {c:?}") })?;
                }
                vertices.push(p);
            }
            Some("f") => {
                let corners = tok
                    .map(|t| resolve_index(t, vertices.len(), line))
                    .collect::<Result<Vec<_>>>()?;
                if corners.len() < 3 {
                    return Err(Error::Parse { line, msg: format!("face needs 3 corners, got {}", corners.len()) });
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn resolve_index(token: &str, seen: usize, line: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let idx: i64 = head.parse().map_err(|_| Error::Parse { line, msg: format!("bad face index {token:?}") })?;
    match idx {
        0 => Err(Error::Parse { line, msg: "face index 0 (OBJ indices are 1-based)".into() }),
        i if i > 0 => Ok((i - 1) as usize),
        i => {
            // negative indices count back from the most recent vertex
            let back = i.unsigned_abs() as usize;
            if back > seen {
                Err(Error::Parse { line, msg: format!("relative index {i} precedes first vertex") })
            } else {
                Ok(seen - back)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_test_mesh, TestMesh};

    const TETRA: &str = "\
# regular tetrahedron
v 1 1 1
v 1 -1 -1
v -1 1 -1
v -1 -1 1
f 1 2 3
f 1 4 2
f 1 3 4
f 2 4 3
";

    #[test]
    fn loads_tetrahedron() {
        let m = parse_obj(TETRA).unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (4, 4));
    }

    #[test]
    fn zero_index_is_parse_error_with_line() {
        let text = TETRA.replace("f 2 4 3", "f 0 4 3");
        match parse_obj(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slashes_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2//1 -1/1\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert_eq!(parse_obj(text).unwrap().faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn malformed_vertex_reports_line() {
        let err = parse_obj("v 0 0 0\nv 1 x 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn out_of_range_index_is_validation_error() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn round_trip_icosphere() {
        let m = make_test_mesh(TestMesh::Icosphere(2)).unwrap();
        let back = parse_obj(&to_obj_string(&m)).unwrap();
        assert_eq!(back.faces(), m.faces());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-6);
            }
        }
    }
}
