//! Graph geodesics over the mesh edge graph and the distance scale map.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{self, Reader};
use crate::mesh::{EdgeGraph, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then on vertex index
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances from `source` to every vertex (Dijkstra).
///
/// Unreachable vertices get `f64::INFINITY`; validated meshes are connected so
/// that never happens for graphs built from a [`TriangleMesh`].
pub fn geodesic_from(graph: &EdgeGraph, source: usize) -> Result<Vec<f64>> {
    let n = graph.vertex_count();
    if source >= n {
        return Err(Error::IndexOutOfRange { index: source, len: n });
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem { dist: 0.0, vertex: source });
    while let Some(HeapItem { dist: d, vertex: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem { dist: nd, vertex: v });
            }
        }
    }
    Ok(dist)
}

/// Maps a geodesic distance onto the cosine-distance range `[0, 2]`:
/// `2 * min(g, g_max) / g_max`.
pub fn scale(g: f64, g_max: f64) -> Result<f64> {
    if !(g_max > 0.0) || !g_max.is_finite() {
        return Err(Error::Argument(format!("g_max must be positive, got {g_max}")));
    }
    if !(g >= 0.0) {
        return Err(Error::Argument(format!("geodesic distance must be nonnegative, got {g}")));
    }
    Ok(2.0 * g.min(g_max) / g_max)
}

/// Precomputed rows of source-to-all geodesic distances.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicCache {
    mesh_hash: [u8; 32],
    vertex_count: usize,
    sources: Vec<usize>,
    rows: Vec<Vec<f64>>,
    index: HashMap<usize, usize>,
    g_max: f64,
}

/// Computes one row per distinct source. Rows are built in parallel.
pub fn build_cache(graph: &EdgeGraph, sources: &[usize]) -> Result<GeodesicCache> {
    if sources.is_empty() {
        return Err(Error::Empty("geodesic cache needs at least one source".into()));
    }
    let mut distinct = Vec::with_capacity(sources.len());
    let mut seen = HashMap::new();
    for &s in sources {
        if s >= graph.vertex_count() {
            return Err(Error::IndexOutOfRange { index: s, len: graph.vertex_count() });
        }
        if seen.insert(s, distinct.len()).is_none() {
            distinct.push(s);
        }
    }
    let rows = distinct.par_iter().map(|&s| geodesic_from(graph, s)).collect::<Result<Vec<_>>>()?;
    GeodesicCache::from_rows([0; 32], graph.vertex_count(), distinct, rows)
}

impl GeodesicCache {
    fn from_rows(mesh_hash: [u8; 32], vertex_count: usize, sources: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let index: HashMap<usize, usize> = sources.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        if index.len() != sources.len() {
            return Err(Error::Argument("duplicate cache source".into()));
        }
        let mut g_max: f64 = 0.0;
        for (row, &s) in rows.iter().zip(&sources) {
            if row.len() != vertex_count || s >= vertex_count {
                return Err(Error::Shape(format!("cache row for source {s} has {} entries", row.len())));
            }
            for &d in row {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::NonFinite(format!("geodesic distance {d} from source {s}")));
                }
                g_max = g_max.max(d);
            }
        }
        Ok(Self { mesh_hash, vertex_count, sources, rows, index, g_max })
    }

    /// Tags the cache with the content hash of the mesh it was built from.
    pub fn with_mesh_hash(mut self, hash: [u8; 32]) -> Self {
        self.mesh_hash = hash;
        self
    }

    pub fn for_mesh(mesh: &TriangleMesh, sources: &[usize]) -> Result<Self> {
        Ok(build_cache(&mesh.edge_graph(), sources)?.with_mesh_hash(mesh.content_hash()))
    }

    pub fn mesh_hash(&self) -> &[u8; 32] {
        &self.mesh_hash
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Largest cached distance.
    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn row(&self, source: usize) -> Option<&[f64]> {
        self.index.get(&source).map(|&i| self.rows[i].as_slice())
    }

    /// `g(a, b)` looked up through whichever endpoint is a cached source.
    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        if a >= self.vertex_count || b >= self.vertex_count {
            return Err(Error::IndexOutOfRange { index: a.max(b), len: self.vertex_count });
        }
        if let Some(r) = self.row(a) {
            Ok(r[b])
        } else if let Some(r) = self.row(b) {
            Ok(r[a])
        } else {
            Err(Error::MissingCacheRow(a, b))
        }
    }

    /// `scale(g(a, b), g_max)`.
    pub fn scaled(&self, a: usize, b: usize) -> Result<f64> {
        scale(self.distance(a, b)?, self.g_max)
    }

    /// Binary layout, little-endian: magic `SCGC`, version, source count,
    /// vertex count, 32-byte mesh hash, source indices (`u32`), then one
    /// `f32` row per source.
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(48 + self.rows.len() * (4 + 4 * self.vertex_count));
        out.extend_from_slice(CACHE_MAGIC);
        io::put_u32(&mut out, CACHE_VERSION);
        io::put_u32(&mut out, io::to_u32(self.sources.len(), "source count")?);
        io::put_u32(&mut out, io::to_u32(self.vertex_count, "vertex count")?);
        out.extend_from_slice(&self.mesh_hash);
        for &s in &self.sources {
            io::put_u32(&mut out, s as u32);
        }
        for row in &self.rows {
            io::put_f32s(&mut out, row);
        }
        Ok(out)
    }

    pub fn decode(buf: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(buf, path);
        r.magic(CACHE_MAGIC)?;
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(r.err(format!("unsupported cache version {version}")));
        }
        let n_src = r.u32()? as usize;
        let n_v = r.u32()? as usize;
        let hash: [u8; 32] = r.bytes(32)?.try_into().unwrap();
        let sources = (0..n_src).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let rows = (0..n_src).map(|_| r.f32s(n_v)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Self::from_rows(hash, n_v, sources, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, &self.encode()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?, path)
    }

    /// Loads `path` when it was built for this mesh and covers `sources`;
    /// otherwise recomputes and rewrites it.
    pub fn load_or_build(path: &Path, mesh: &TriangleMesh, sources: &[usize]) -> Result<Self> {
        if let Ok(cache) = Self::load(path) {
            if cache.mesh_hash == mesh.content_hash() && sources.iter().all(|s| cache.index.contains_key(s)) {
                return Ok(cache);
            }
        }
        let cache = Self::for_mesh(mesh, sources)?;
        cache.save(path)?;
        Ok(cache)
    }
}

const CACHE_MAGIC: &[u8; 4] = b"SCGC";
const CACHE_VERSION: u32 = 1;
