//! Acceptance suite. Each criterion is checked against an oracle written
//! here, independently of the library code it verifies, and prints one
//! PASS/FAIL line. The process exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surfcorr::correspondence::{
    encode_corrs, generate_pseudo_correspondences, Camera, Correspondence, CorrespondenceSet, CountRange, ImageMeta, Mask,
    Pixel,
};
use surfcorr::embedding::{EmbeddingField, VertexEmbeddingTable, VertexMap};
use surfcorr::fusion::{cross_fuse, FusionParams, LatentEncoder, TokenMap};
use surfcorr::geodesics::{build_cache, geodesic_from, GeodesicCache};
use surfcorr::losses::suite::GradTarget;
use surfcorr::losses::{
    loss_consistency, loss_geodesic, loss_total, optimize_embeddings, GeodesicMode, LossReport, LossWeights, SameImagePair,
    ToyConfig,
};
use surfcorr::mesh::{make_test_mesh, EdgeGraph, TestMesh, TriangleMesh};
use surfcorr::metrics::{gps, gps_ap_ar, reid_eval, GpsConfig, Protocol, RetrievalInstance, SampleLabels};
use surfcorr::scene::{synth_scene, Scene, SceneKind};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_acce_97a0_0000)
}

fn gauss(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, kept local so the oracles do not share the library sampler
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: surfcorr::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

// ---------------------------------------------------------------- 1

/// Grid with a random diagonal per cell and jittered vertices.
fn random_grid(n: usize, r: &mut ChaCha8Rng) -> TriangleMesh {
    let step = 1.0 / (n - 1) as f64;
    let vs: Vec<[f64; 3]> = (0..n * n)
        .map(|i| {
            let (y, x) = ((i / n) as f64, (i % n) as f64);
            [(x + r.random_range(-0.3..0.3)) * step, (y + r.random_range(-0.3..0.3)) * step, r.random_range(-0.5..0.5)]
        })
        .collect();
    let mut faces = Vec::new();
    for y in 0..n - 1 {
        for x in 0..n - 1 {
            let (a, b, c, d) = (y * n + x, y * n + x + 1, (y + 1) * n + x, (y + 1) * n + x + 1);
            if r.random::<bool>() {
                faces.extend([[a, b, d], [a, d, c]]);
            } else {
                faces.extend([[a, b, c], [b, d, c]]);
            }
        }
    }
    TriangleMesh::new(vs, faces).expect("jittered grid is valid")
}

fn jittered_sphere(level: u32, r: &mut ChaCha8Rng) -> TriangleMesh {
    let base = make_test_mesh(TestMesh::Icosphere(level)).unwrap();
    let vs = base.vertices().iter().map(|v| v.map(|x| x * (1.0 + r.random_range(-0.1..0.1)))).collect();
    TriangleMesh::new(vs, base.faces().to_vec()).unwrap()
}

/// All-pairs shortest paths by Floyd-Warshall, returning for each source
/// the path length re-summed edge by edge from the source outward.
fn floyd_warshall(n: usize, w: &BTreeMap<(usize, usize), f64>) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    let mut next = vec![vec![usize::MAX; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        next[i][i] = i;
    }
    for (&(u, v), &len) in w {
        d[u][v] = len;
        next[u][v] = v;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i][k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let cand = dik + d[k][j];
                if cand < d[i][j] {
                    d[i][j] = cand;
                    next[i][j] = next[i][k];
                }
            }
        }
    }
    (0..n)
        .map(|s| {
            (0..n)
                .map(|t| {
                    let (mut at, mut sum) = (s, 0.0);
                    while at != t {
                        let nx = next[at][t];
                        sum += w[&(at, nx)];
                        at = nx;
                    }
                    sum
                })
                .collect()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut lib_time = Duration::ZERO;
    let mut sizes = Vec::new();
    for m in 0..25 {
        let mesh = if m % 5 == 4 { jittered_sphere((m / 5 % 3) as u32, &mut r) } else { random_grid(r.random_range(3..=14), &mut r) };
        let n = mesh.vertex_count();
        ensure(n <= 200, || format!("mesh {m} has {n} vertices"))?;
        sizes.push(n);

        // edge lengths straight from the faces
        let mut expect: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for f in mesh.faces() {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let len = dist3(mesh.vertices()[a], mesh.vertices()[b]);
                expect.insert((a, b), len);
                expect.insert((b, a), len);
            }
        }
        let graph = mesh.edge_graph();
        let mut weights = BTreeMap::new();
        for u in 0..n {
            for &(v, len) in graph.neighbors(u) {
                let want = expect.get(&(u, v)).ok_or(format!("mesh {m}: edge {u}-{v} is not a face edge"))?;
                ensure((len - want).abs() <= 1e-12 * want, || format!("mesh {m}: edge {u}-{v} length {len} vs {want}"))?;
                weights.insert((u, v), len);
            }
        }
        ensure(weights.len() == expect.len(), || format!("mesh {m}: {} directed edges, faces give {}", weights.len(), expect.len()))?;

        let oracle = floyd_warshall(n, &weights);
        let start = Instant::now();
        let rows: Vec<Vec<f64>> = (0..n).map(|s| geodesic_from(&graph, s)).collect::<surfcorr::Result<_>>().map_err(|e| e.to_string())?;
        lib_time += start.elapsed();
        for s in 0..n {
            for t in 0..n {
                ensure(rows[s][t] == oracle[s][t], || format!("mesh {m}: g({s},{t}) = {} vs oracle {}", rows[s][t], oracle[s][t]))?;
            }
        }
    }
    ensure(lib_time < Duration::from_secs(10), || format!("geodesics took {lib_time:?}"))?;
    Ok(format!("25 meshes ({}..{} vertices) match exactly, {lib_time:.2?}", sizes.iter().min().unwrap(), sizes.iter().max().unwrap()))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    const STEP: f64 = 1e-5;
    let mut summary = Vec::new();
    for target in GradTarget::ALL {
        let mut worst: f64 = 0.0;
        let mut min_coords = usize::MAX;
        for seed in 0..10 {
            let p = lib(target.problem(seed))?;
            let (_, grad) = lib((p.f)(&p.x))?;
            let n = p.x.len();
            let coords: Vec<usize> = if n <= 100 { (0..n).collect() } else { sample(&mut rng(seed), n, 100).into_vec() };
            min_coords = min_coords.min(coords.len());
            let mut x = p.x.clone();
            for i in coords {
                x[i] = p.x[i] + STEP;
                let up = lib((p.f)(&x))?.0;
                x[i] = p.x[i] - STEP;
                let down = lib((p.f)(&x))?.0;
                x[i] = p.x[i];
                let numeric = (up - down) / (2.0 * STEP);
                worst = worst.max((grad[i] - numeric).abs() / numeric.abs().max(1e-4));
            }
        }
        ensure(min_coords >= 100, || format!("{} sampled only {min_coords} coordinates", target.name()))?;
        ensure(worst < 1e-5, || format!("{}: max relative error {worst:.3e}", target.name()))?;
        summary.push(format!("{} {worst:.1e}", target.name()));
    }
    Ok(format!("10 seeds x 100 coords each; worst: {}", summary.join(", ")))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mesh = make_test_mesh(TestMesh::Icosphere(1)).unwrap();
    let n = mesh.vertex_count();
    let cache = lib(GeodesicCache::for_mesh(&mesh, &(0..n).collect::<Vec<_>>()))?;
    let mut checked = 0;
    for inst in 0..100 {
        let mut r = rng(300 + inst);
        let dim = r.random_range(2..10);
        let table: Vec<f64> = (0..n * dim).map(|_| gauss(&mut r)).collect();
        let (h, w) = (r.random_range(2..8), r.random_range(2..8));
        let data: Vec<f64> = (0..h * w * dim).map(|_| gauss(&mut r)).collect();
        let count = r.random_range(1..=h * w);
        // ground truth is whatever the pixel already predicts: the vertex
        // with the largest dot product, lower index on ties
        let mut entries = Vec::new();
        for idx in sample(&mut r, h * w, count).into_vec() {
            let px = &data[idx * dim..][..dim];
            let v = (0..n).max_by(|&a, &b| dot(px, &table[a * dim..][..dim]).total_cmp(&dot(px, &table[b * dim..][..dim])).then(b.cmp(&a))).unwrap();
            entries.push(Correspondence { pixel: Pixel::new(idx / w, idx % w), vertex: v });
        }
        entries.sort();
        let field = lib(EmbeddingField::new(dim, data, Mask::filled(h, w, true)))?;
        let table = lib(VertexEmbeddingTable::new(n, dim, table))?;
        let corrs = CorrespondenceSet { image: "x".into(), height: h, width: w, pid: 0, cam: 0, clothes: 0, entries, cross_view: vec![] };
        let t = r.random_range(0.05..2.0);
        let loss = lib(loss_geodesic(&field, &table, t, &corrs, &cache, GeodesicMode::Literal))?;
        checked += corrs.entries.len();
        ensure(loss.value == 0.0, || format!("instance {inst}: literal loss {:e}", loss.value))?;
    }
    Ok(format!("100 instances with correct predictions give exactly 0 ({checked} pixels)"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let w = LossWeights::default();
    let pinned = [w.lambda1, w.alpha, w.lambda2, w.lambda3];
    ensure(pinned == [0.3, 5.0, 1.0, 0.8], || format!("default weights {pinned:?}"))?;
    let parts: BTreeMap<String, LossReport> = ["sil", "geo", "cst", "id", "tri"]
        .iter()
        .map(|n| (n.to_string(), LossReport { value: 1.0, ..Default::default() }))
        .collect();
    let total = lib(loss_total(&parts, &w))?.value;
    // 1 + 0.3 * (1 + 5 * 1) + 1 * 1 + 0.8 * 1
    ensure((total - 4.6).abs() <= 1e-12, || format!("total {total}"))?;
    Ok(format!("unit sub-losses total {total}"))
}

// ---------------------------------------------------------------- 5

/// A path graph 0 - 1 - 2 - ... with the given edge lengths.
fn path_cache(lengths: &[f64]) -> GeodesicCache {
    let edges: Vec<(usize, usize, f64)> = lengths.iter().enumerate().map(|(i, &l)| (i, i + 1, l)).collect();
    let graph = EdgeGraph::from_edges(lengths.len() + 1, &edges).unwrap();
    build_cache(&graph, &(0..=lengths.len()).collect::<Vec<_>>()).unwrap()
}

fn image(name: &str, pixels: &[(usize, usize)]) -> CorrespondenceSet {
    CorrespondenceSet {
        image: name.into(),
        height: 1,
        width: pixels.len(),
        pid: 0,
        cam: 0,
        clothes: 0,
        entries: pixels.iter().enumerate().map(|(c, &(v, _))| Correspondence { pixel: Pixel::new(0, c), vertex: v }).collect(),
        cross_view: vec![],
    }
}

fn prediction(pixels: &[(usize, usize)]) -> VertexMap {
    VertexMap { height: 1, width: pixels.len(), data: pixels.iter().map(|&(_, p)| Some(p)).collect() }
}

/// Name, dataset, expected AP and AR at 0.50 / 0.75 / 0.95.
type Fixture = (&'static str, Vec<(CorrespondenceSet, Option<VertexMap>)>, [f64; 3], [f64; 3]);

fn criterion_5() -> Outcome {
    let sigma = 0.255;
    // vertex 0 to 1 is sigma, 0 to 2 is 2 sigma
    let cache = path_cache(&[sigma, sigma]);
    let single = [(0, 1)];
    let g = lib(gps(&image("a", &single), &prediction(&single), &cache, sigma))?;
    ensure((g - (-0.5f64).exp()).abs() <= 1e-12, || format!("single-pixel GPS {g}"))?;

    let cfg = GpsConfig { sigma, thresholds: vec![0.50, 0.75, 0.95] };
    let exact = [(0, 0), (1, 1)];
    let mixed = [(0, 0), (0, 1)]; // GPS (1 + e^-1/2) / 2 = 0.803
    let one_sigma = [(2, 1)]; // e^-1/2 = 0.607
    let two_sigma = [(0, 2)]; // e^-2 = 0.135
    let fixtures: [Fixture; 3] = [
        (
            "perfect, one sigma, missing",
            vec![(image("a", &exact), Some(prediction(&exact))), (image("b", &one_sigma), Some(prediction(&one_sigma))), (image("c", &exact), None)],
            [1.0, 1.0 / 2.0, 1.0 / 2.0],
            [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        ),
        (
            "perfect, mixed, two sigma",
            vec![(image("a", &exact), Some(prediction(&exact))), (image("b", &mixed), Some(prediction(&mixed))), (image("c", &two_sigma), Some(prediction(&two_sigma)))],
            [2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0],
            [2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0],
        ),
        (
            "mixed, missing, missing",
            vec![(image("a", &mixed), Some(prediction(&mixed))), (image("b", &exact), None), (image("c", &one_sigma), None)],
            [1.0, 1.0, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, 0.0],
        ),
    ];
    for (name, data, ap, ar) in &fixtures {
        let t = lib(gps_ap_ar(data, &cache, &cfg))?;
        ensure(t.ap == ap, || format!("{name}: AP {:?}, expected {ap:?}", t.ap))?;
        ensure(t.ar == ar, || format!("{name}: AR {:?}, expected {ar:?}", t.ar))?;
        let (mean_ap, mean_ar) = ((ap[0] + ap[1] + ap[2]) / 3.0, (ar[0] + ar[1] + ar[2]) / 3.0);
        ensure((t.mean_ap - mean_ap).abs() <= 1e-15 && (t.mean_ar - mean_ar).abs() <= 1e-15, || format!("{name}: means {} {}", t.mean_ap, t.mean_ar))?;
    }
    Ok(format!("GPS(g = sigma) = {g:.15}; 3 fixtures match at 0.50/0.75/0.95"))
}

// ---------------------------------------------------------------- 6

/// Exhaustive evaluator: returns (mAP, CMC, evaluated) or None when no
/// query has a positive.
fn reid_oracle(inst: &RetrievalInstance) -> Option<(f64, Vec<f64>, usize)> {
    let d = inst.dim;
    let n_g = inst.gallery_labels.len();
    let mut ap_sum = 0.0;
    let mut hits = vec![0usize; n_g];
    let mut evaluated = 0;
    for (qi, q) in inst.query_labels.iter().enumerate() {
        let qf = &inst.query[qi * d..][..d];
        let mut kept: Vec<(f64, usize, bool)> = Vec::new();
        for (gi, g) in inst.gallery_labels.iter().enumerate() {
            let same_id = g.id == q.id;
            if same_id && g.cam == q.cam {
                continue;
            }
            let drop = match inst.protocol {
                Protocol::Standard => false,
                Protocol::ClothChanging => same_id && g.clothes == q.clothes,
                Protocol::SameClothes => same_id && g.clothes != q.clothes,
            };
            if drop {
                continue;
            }
            let gf = &inst.gallery[gi * d..][..d];
            let dist = qf.iter().zip(gf).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            kept.push((dist, gi, same_id));
        }
        kept.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let positives = kept.iter().filter(|k| k.2).count();
        if positives == 0 {
            continue;
        }
        evaluated += 1;
        let (mut found, mut ap) = (0, 0.0);
        for (rank, k) in kept.iter().enumerate() {
            if k.2 {
                found += 1;
                ap += found as f64 / (rank + 1) as f64;
            }
        }
        ap_sum += ap / positives as f64;
        let first = kept.iter().position(|k| k.2).unwrap();
        for h in hits.iter_mut().skip(first) {
            *h += 1;
        }
    }
    (evaluated > 0).then(|| (ap_sum / evaluated as f64, hits.iter().map(|&h| h as f64 / evaluated as f64).collect(), evaluated))
}

fn criterion_6() -> Outcome {
    let mut compared = 0;
    for inst_seed in 0..50 {
        let mut r = rng(600 + inst_seed);
        let dim = r.random_range(1..6);
        let (n_q, n_g) = (r.random_range(1..12), r.random_range(1..=40));
        let label = |r: &mut ChaCha8Rng| SampleLabels { id: r.random_range(0..4), cam: r.random_range(0..3), clothes: r.random_range(0..2) };
        let query_labels: Vec<_> = (0..n_q).map(|_| label(&mut r)).collect();
        let gallery_labels: Vec<_> = (0..n_g).map(|_| label(&mut r)).collect();
        let query: Vec<f64> = (0..n_q * dim).map(|_| gauss(&mut r)).collect();
        let gallery: Vec<f64> = (0..n_g * dim).map(|_| gauss(&mut r)).collect();
        for protocol in Protocol::ALL {
            let inst = RetrievalInstance {
                dim,
                query: query.clone(),
                query_labels: query_labels.clone(),
                gallery: gallery.clone(),
                gallery_labels: gallery_labels.clone(),
                protocol,
            };
            match (reid_oracle(&inst), reid_eval(&inst)) {
                (None, Err(_)) => {}
                (Some((map, cmc, evaluated)), Ok(got)) => {
                    ensure((got.map - map).abs() <= 1e-12, || format!("instance {inst_seed} {}: mAP {} vs {map}", protocol.name(), got.map))?;
                    ensure(got.cmc == cmc, || format!("instance {inst_seed} {}: CMC {:?} vs {cmc:?}", protocol.name(), got.cmc))?;
                    ensure(got.evaluated == evaluated && got.evaluated + got.skipped.len() == n_q, || {
                        format!("instance {inst_seed}: evaluated {} skipped {}", got.evaluated, got.skipped.len())
                    })?;
                    compared += 1;
                }
                (o, l) => return Err(format!("instance {inst_seed} {}: oracle {o:?}, library {:?}", protocol.name(), l.map(|x| x.map))),
            }
        }
    }
    Ok(format!("50 instances x 3 protocols ({compared} with positives) match"))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut shapes = Vec::new();
    for s in 0..20 {
        let mut r = rng(700 + s);
        let heads = [1, 2, 4][r.random_range(0..3)];
        let (h, w, c) = (r.random_range(1..6), r.random_range(1..6), heads * r.random_range(1..4));
        let k = [1, 3, 5][r.random_range(0..3)];
        let map = |r: &mut ChaCha8Rng| TokenMap::new(h, w, c, (0..h * w * c).map(|_| gauss(r)).collect()).unwrap();
        let (fg, fs) = (map(&mut r), map(&mut r));
        let enc = |r: &mut ChaCha8Rng| LatentEncoder::new((h, w, c), (0..c * h * w * c).map(|_| 0.1 * gauss(r)).collect(), true).unwrap();
        let params = lib(FusionParams::random((enc(&mut r), enc(&mut r)), heads, k, s, true))?;
        let out = lib(cross_fuse(&fg, &fs, &params))?;
        let bits = |m: &TokenMap| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure(bits(&out.fg) == bits(&fg), || format!("shape {h}x{w}x{c}: appearance map changed"))?;
        ensure(bits(&out.fs) == bits(&fs), || format!("shape {h}x{w}x{c}: shape map changed"))?;
        ensure(out.fg.shape() == (h, w, c) && out.fs.shape() == (h, w, c), || "output shape changed".into())?;
        shapes.push(format!("{h}x{w}x{c}"));
    }
    Ok(format!("20 shapes bit-exact ({} ...)", shapes[..4].join(", ")))
}

// ---------------------------------------------------------------- 8

/// Independent projection: (pixel, depth) when visible.
fn project(camera: &Camera, p: [f64; 3], h: usize, w: usize) -> Option<(Pixel, f64)> {
    let (y, x, z) = match *camera {
        Camera::ScaledOrthographic { scale, tx, ty } => (scale * p[1] + ty, scale * p[0] + tx, p[2]),
        Camera::Pinhole { focal, cx, cy, rotation: r, translation: t } => {
            let c: Vec<f64> = (0..3).map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i]).collect();
            if c[2] <= 0.0 {
                return None;
            }
            (focal * c[1] / c[2] + cy, focal * c[0] / c[2] + cx, c[2])
        }
    };
    if !(y >= 0.0 && x >= 0.0 && y < h as f64 && x < w as f64) {
        return None;
    }
    Some((Pixel::new(y.floor() as usize, x.floor() as usize), z))
}

/// Checks every entry against the camera: it must be the nearest vertex
/// (lower index on ties) landing on its pixel, and the pixel must be
/// foreground.
fn verify_set(mesh: &TriangleMesh, camera: &Camera, mask: &Mask, set: &CorrespondenceSet) -> Result<(), String> {
    let mut front: BTreeMap<Pixel, (f64, usize)> = BTreeMap::new();
    for (v, &p) in mesh.vertices().iter().enumerate() {
        if let Some((px, z)) = project(camera, p, mask.height, mask.width) {
            let slot = front.entry(px).or_insert((z, v));
            if z < slot.0 {
                *slot = (z, v);
            }
        }
    }
    for e in &set.entries {
        ensure(mask.get(e.pixel), || format!("{}: {:?} is background", set.image, e.pixel))?;
        let winner = front.get(&e.pixel).map(|w| w.1);
        ensure(winner == Some(e.vertex), || format!("{}: {:?} holds vertex {} but the front vertex is {winner:?}", set.image, e.pixel, e.vertex))?;
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let (mut sets_checked, mut entries_checked) = (0, 0);
    let (mut lo, mut hi) = (usize::MAX, 0);
    for kind in [SceneKind::Sphere, SceneKind::TwoViewGrid] {
        for seed in 0..5 {
            let scene = lib(synth_scene(kind, seed))?;
            let by_name: BTreeMap<&str, &CorrespondenceSet> = scene.sets.iter().map(|s| (s.image.as_str(), s)).collect();
            for (view, set) in scene.views.iter().zip(&scene.sets) {
                verify_set(&scene.mesh, &view.camera, view.mask(), set)?;
                for l in &set.cross_view {
                    let there = by_name[l.partner_image.as_str()].vertex_at(l.partner);
                    ensure(there.is_some() && there == set.vertex_at(l.local), || format!("{}: link {l:?} joins different vertices", set.image))?;
                }
                let n = set.entries.len();
                ensure((80..=125).contains(&n), || format!("{}: {n} entries", set.image))?;
                lo = lo.min(n);
                hi = hi.max(n);
                sets_checked += 1;
                entries_checked += n;
            }
            // direct generation on each view, several seeds
            for (i, view) in scene.views.iter().enumerate() {
                let meta = ImageMeta { image: view.image.clone(), pid: 0, cam: i as i64, clothes: 0 };
                let gen = |s| generate_pseudo_correspondences(&scene.mesh, &view.camera, view.mask(), CountRange::default(), &meta, s);
                let a = lib(gen(seed * 31 + 1))?;
                verify_set(&scene.mesh, &view.camera, view.mask(), &a)?;
                let n = a.entries.len();
                ensure((80..=125).contains(&n), || format!("generated {n} entries"))?;
                let b = lib(gen(seed * 31 + 1))?;
                ensure(lib(encode_corrs([&a]))? == lib(encode_corrs([&b]))?, || "same-seed generation differs".into())?;
                sets_checked += 1;
                entries_checked += n;
            }
            let rerun = lib(synth_scene(kind, seed))?;
            scene_bytes_equal(&scene, &rerun)?;
        }
    }
    Ok(format!("{entries_checked} entries in {sets_checked} sets verified, counts {lo}..{hi}, reruns byte-identical"))
}

fn scene_bytes_equal(a: &Scene, b: &Scene) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (da, db) = (dir.path().join("a"), dir.path().join("b"));
    lib(a.save(&da))?;
    lib(b.save(&db))?;
    let list = |d: &std::path::Path| {
        let mut v: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    ensure(list(&da) == list(&db), || "scene file lists differ".into())?;
    for f in list(&da) {
        ensure(std::fs::read(da.join(&f)).unwrap() == std::fs::read(db.join(&f)).unwrap(), || format!("{f:?} differs between reruns"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- 9

/// Dijkstra by linear scan over unsettled vertices.
fn geodesic_row(mesh: &TriangleMesh, src: usize) -> Vec<f64> {
    let n = mesh.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for f in mesh.faces() {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let l = dist3(mesh.vertices()[a], mesh.vertices()[b]);
            adj[a].push((b, l));
            adj[b].push((a, l));
        }
    }
    let mut d = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    d[src] = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|&v| !done[v]).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        done[u] = true;
        for &(v, l) in &adj[u] {
            d[v] = d[v].min(d[u] + l);
        }
    }
    d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Image-level AP at 0.5 from scratch: predicted vertex by dot-product argmax,
/// GPS from the independent geodesic rows.
fn ap50(scene: &Scene, rows: &BTreeMap<usize, Vec<f64>>, fields: &[EmbeddingField], table: &VertexEmbeddingTable) -> f64 {
    let sigma: f64 = 0.255;
    let mut correct = 0;
    for (set, field) in scene.sets.iter().zip(fields) {
        let mut sum = 0.0;
        for e in &set.entries {
            let emb = field.at(e.pixel);
            let pred = (0..table.rows()).max_by(|&a, &b| dot(emb, table.row(a)).total_cmp(&dot(emb, table.row(b))).then(b.cmp(&a))).unwrap();
            let g = rows[&e.vertex][pred];
            sum += (-g * g / (2.0 * sigma * sigma)).exp();
        }
        if sum / set.entries.len() as f64 >= 0.5 {
            correct += 1;
        }
    }
    correct as f64 / scene.sets.len() as f64
}

fn criterion_9() -> Outcome {
    let scene = lib(synth_scene(SceneKind::Sphere, 0))?;
    let annotated: usize = scene.sets.iter().map(|s| s.entries.len()).sum();
    ensure(scene.views.len() == 2 && scene.mesh.vertex_count() <= 642, || "scene shape".into())?;
    let rows: BTreeMap<usize, Vec<f64>> = scene.annotated_vertices().into_iter().map(|v| (v, geodesic_row(&scene.mesh, v))).collect();

    let cfg = ToyConfig::default();
    ensure(cfg.steps == 500, || format!("default steps {}", cfg.steps))?;
    let init = lib(optimize_embeddings(&scene, &ToyConfig { steps: 0, ..cfg }))?;
    let start = Instant::now();
    let fit = lib(optimize_embeddings(&scene, &cfg))?;
    let elapsed = start.elapsed();

    let before = ap50(&scene, &rows, &init.fields, &init.table);
    let after = ap50(&scene, &rows, &fit.fields, &fit.table);
    let (a, b) = (&scene.sets[0], &scene.sets[1]);
    ensure(a.cross_view.iter().all(|l| l.partner_image == b.image), || "links point elsewhere".into())?;
    let linked = a.cross_view.iter().map(|l| 1.0 - cosine(fit.fields[0].at(l.local), fit.fields[1].at(l.partner))).sum::<f64>() / a.cross_view.len() as f64;
    let rises: Vec<usize> = (10..fit.trace.len() - 1).filter(|&i| fit.trace[i + 1] > fit.trace[i]).collect();

    let report = format!(
        "{annotated} pixels; AP@0.50 {before:.2} -> {after:.2}; linked distance {linked:.4}; {} rises after step 10; {elapsed:.2?}",
        rises.len()
    );
    ensure(before < 0.1, || format!("init AP@0.50 {before}; {report}"))?;
    ensure(after > 0.9, || format!("trained AP@0.50 {after}; {report}"))?;
    ensure(linked < 0.05, || format!("linked distance {linked}; {report}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    ensure(rises.is_empty(), || format!("trace rises at steps {:?}; {report}", &rises[..rises.len().min(5)]))?;
    Ok(report)
}

// ---------------------------------------------------------------- 10

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn criterion_10() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    let mesh = make_test_mesh(TestMesh::Icosphere(1)).unwrap();
    let n = mesh.vertex_count();
    let cache = lib(GeodesicCache::for_mesh(&mesh, &(0..n).collect::<Vec<_>>()))?;
    let g_max = cache.g_max();
    let mut min_seen = f64::INFINITY;

    for inst in 0..200 {
        let mut r = rng(1000 + inst);
        let (h, w, dim) = (r.random_range(3..8), r.random_range(3..8), r.random_range(2..8));
        let field = |r: &mut ChaCha8Rng| EmbeddingField::new(dim, (0..h * w * dim).map(|_| gauss(r)).collect(), Mask::filled(h, w, true)).unwrap();
        let (f0, f1) = (field(&mut r), field(&mut r));
        let px = |r: &mut ChaCha8Rng| Pixel::new(r.random_range(0..h), r.random_range(0..w));
        let cross: Vec<(Pixel, Pixel)> = (0..r.random_range(1..10)).map(|_| (px(&mut r), px(&mut r))).collect();
        let same: Vec<SameImagePair> = (0..r.random_range(1..10))
            .map(|_| SameImagePair { image: r.random_range(0..2), p1: px(&mut r), p2: px(&mut r), v1: r.random_range(0..n), v2: r.random_range(0..n) })
            .collect();
        let c = lib(loss_consistency((&f0, &f1), &cross, &[], &cache, g_max))?.value;
        let s = lib(loss_consistency((&f0, &f1), &[], &same, &cache, g_max))?.value;
        let both = lib(loss_consistency((&f0, &f1), &cross, &same, &cache, g_max))?.value;
        ensure(c >= ln2 - 1e-9 && s >= ln2 - 1e-9, || format!("instance {inst}: terms {c} {s} below ln 2"))?;
        ensure(both >= 2.0 * ln2 - 1e-9, || format!("instance {inst}: combined {both} below 2 ln 2"))?;
        ensure((both - (c + s)).abs() <= 1e-12, || format!("instance {inst}: combined {both} != {c} + {s}"))?;
        min_seen = min_seen.min(c).min(s);
    }

    // optimal construction: linked pixels share an embedding, same-image
    // pairs sit at cosine distance exactly s(g)
    let mut r = rng(99);
    let (h, w, dim) = (4, 6, 3);
    let mut d0 = vec![0.0; h * w * dim];
    let mut d1 = vec![0.0; h * w * dim];
    let mut cross = Vec::new();
    let mut same = Vec::new();
    for col in 0..w {
        let e: Vec<f64> = (0..dim).map(|_| gauss(&mut r)).collect();
        d0[col * dim..][..dim].copy_from_slice(&e);
        d1[col * dim..][..dim].copy_from_slice(&e);
        cross.push((Pixel::new(0, col), Pixel::new(0, col)));
        // rows 1 and 2 of image 0 hold a pair at angle acos(1 - s)
        let (v1, v2) = (r.random_range(0..n), r.random_range(0..n));
        let g = rows_distance(&mesh, v1, v2);
        let target = 2.0 * g.min(g_max) / g_max;
        let theta = (1.0 - target).clamp(-1.0, 1.0).acos();
        d0[(w + col) * dim..][..dim].copy_from_slice(&[1.0, 0.0, 0.0]);
        d0[(2 * w + col) * dim..][..dim].copy_from_slice(&[theta.cos(), theta.sin(), 0.0]);
        same.push(SameImagePair { image: 0, p1: Pixel::new(1, col), p2: Pixel::new(2, col), v1, v2 });
    }
    for d in [&mut d0, &mut d1] {
        for v in d.iter_mut().skip(3 * w * dim) {
            *v = 1.0;
        }
    }
    let f0 = lib(EmbeddingField::new(dim, d0, Mask::filled(h, w, true)))?;
    let f1 = lib(EmbeddingField::new(dim, d1, Mask::filled(h, w, true)))?;
    let c = lib(loss_consistency((&f0, &f1), &cross, &[], &cache, g_max))?.value;
    let s = lib(loss_consistency((&f0, &f1), &[], &same, &cache, g_max))?.value;
    let both = lib(loss_consistency((&f0, &f1), &cross, &same, &cache, g_max))?.value;
    ensure((c - ln2).abs() <= 1e-6, || format!("optimal cross term {c}"))?;
    ensure((s - ln2).abs() <= 1e-6, || format!("optimal same-image term {s}"))?;
    ensure((both - 2.0 * ln2).abs() <= 2e-6, || format!("optimal combined {both}"))?;
    ensure((softplus(0.0) - ln2).abs() < 1e-15, || "softplus oracle".into())?;
    Ok(format!(
        "200 random instances: each term >= ln 2 (min {min_seen:.6}), combined >= 2 ln 2; optimal terms {c:.9} / {s:.9}"
    ))
}

fn rows_distance(mesh: &TriangleMesh, a: usize, b: usize) -> f64 {
    geodesic_row(mesh, a)[b]
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("geodesics match Floyd-Warshall", criterion_1),
        ("analytic gradients match finite differences", criterion_2),
        ("literal geodesic loss vanishes on correct predictions", criterion_3),
        ("weighted total of unit losses is 4.6", criterion_4),
        ("GPS kernel and AP/AR tables", criterion_5),
        ("retrieval matches the brute-force evaluator", criterion_6),
        ("zero-projection fusion is the identity", criterion_7),
        ("pseudo-correspondences re-project and reproduce", criterion_8),
        ("toy optimization end to end", criterion_9),
        ("consistency loss floor", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{t:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{t:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
