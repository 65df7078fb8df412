//! The `surfcorr` command line.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.
//! Every output file is written to a temporary sibling and renamed into
//! place, so a failed run never leaves a partial file behind.

mod config;

pub use config::{Settings, KNOWN_KEYS};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::correspondence::{
    generate_pseudo_correspondences, link_cross_view, read_corrs, sample_annotation_pixels, write_corrs,
    AnnotationSampling, Camera, CorrespondenceSet, CountRange, ImageMeta, Mask,
};
use crate::embedding::{pca_project, read_field, write_field, VertexMap};
use crate::error::{Error, Result};
use crate::geodesics::GeodesicCache;
use crate::io::{read_pgm, read_tensors, write_atomic, write_tensors, NamedTensor};
use crate::losses::suite::GradTarget;
use crate::losses::{optimize_embeddings, LossWeights, ToyConfig};
use crate::mesh::load_mesh;
use crate::metrics::{gps_ap_ar, reid_eval, GpsConfig, Protocol, RetrievalInstance, SampleLabels};
use crate::scene::{synth_scene, Scene, SceneKind};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SURFCORR_THREADS";
/// Relative error above which `loss check-grad` fails.
pub const GRAD_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "surfcorr", version, about = "Dense 2D-3D surface correspondence toolkit")]
struct Cli {
    /// Optional `key = value` file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random stage (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mesh utilities.
    #[command(subcommand)]
    Mesh(MeshCmd),
    /// Geodesic distance caches.
    #[command(subcommand)]
    Geodesic(GeodesicCmd),
    /// Correspondence generation, annotation sampling and linking.
    #[command(subcommand)]
    Corr(CorrCmd),
    /// Loss diagnostics.
    #[command(subcommand)]
    Loss(LossCmd),
    /// Fit embeddings on a synthetic or saved scene.
    TrainToy(TrainToyArgs),
    /// GPS and retrieval evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Visualizations.
    #[command(subcommand)]
    Viz(VizCmd),
    /// Write a synthetic two-view scene.
    SynthScene(SynthArgs),
}

#[derive(Debug, Subcommand)]
enum MeshCmd {
    /// Parse and validate an OBJ mesh.
    Validate { mesh: PathBuf },
}

#[derive(Debug, Subcommand)]
enum GeodesicCmd {
    /// Compute geodesic rows for a set of source vertices.
    Precompute {
        #[arg(long)]
        mesh: PathBuf,
        /// Comma-separated vertex indices, or `all`.
        #[arg(long, default_value = "all")]
        sources: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum CorrCmd {
    /// Pseudo-correspondences from a mesh, a camera and a mask.
    Generate(GenerateArgs),
    /// Annotation pixels from a part-label map.
    SampleAnnot {
        /// PGM part map, 0 = background.
        #[arg(long)]
        parts: PathBuf,
        /// CSV of `row,col,kind`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        uniform: Option<usize>,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Add cross-view links between every pair of images of one person.
    Link {
        #[arg(long)]
        corrs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        links: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// JSON camera object.
    #[arg(long)]
    camera: PathBuf,
    /// PGM foreground mask; nonzero is foreground.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "image")]
    image: String,
    #[arg(long, default_value_t = 0)]
    pid: i64,
    #[arg(long, default_value_t = 0)]
    cam: i64,
    #[arg(long, default_value_t = 0)]
    clothes: i64,
    #[arg(long)]
    count_min: Option<usize>,
    #[arg(long)]
    count_max: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum LossCmd {
    /// Finite-difference check of a loss or fusion gradient.
    CheckGrad {
        /// sil, geo, cst, id, tri, tri-inactive, lcp, mha or fuse.
        #[arg(long)]
        which: String,
        /// Number of consecutive seeds starting at `--seed`.
        #[arg(long)]
        seeds: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct TrainToyArgs {
    /// Scene directory, or `sphere` / `twoview-grid` to synthesize one.
    #[arg(long)]
    scene: String,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value = "toy-out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    /// GPS AP/AR table as CSV.
    Gps {
        #[arg(long)]
        gt: PathBuf,
        /// Predictions in the correspondence JSONL format.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Retrieval mAP and CMC.
    Reid {
        /// Tensor file holding `query` and `gallery` matrices.
        #[arg(long)]
        features: PathBuf,
        /// CSV `split,id,cam,clothes` with `split` in {query, gallery}.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "standard")]
        protocol: String,
    },
}

#[derive(Debug, Subcommand)]
enum VizCmd {
    /// Principal-component image of an embedding field.
    Pca {
        #[arg(long)]
        field: PathBuf,
        /// PPM output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dims: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// `sphere` or `twoview-grid`.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the CLI on `argv` (program name first) with the process streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    run_with(argv, &mut out, &mut err)
}

/// [`run`] with explicit output and error streams.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    // Output is buffered so the command can run inside a rayon pool.
    let mut buf = Vec::new();
    let result = thread_pool().and_then(|pool| match pool {
        Some(p) => p.install(|| execute(cli, &mut buf)),
        None => execute(cli, &mut buf),
    });
    let _ = out.write_all(&buf);
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, Error::Argument(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(None) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Argument(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("input file {} does not exist", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(Error::Validation(format!("output directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn execute(cli: Cli, out: &mut Vec<u8>) -> Result<()> {
    let settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let seed = settings.pick(cli.seed, "seed", 0u64)?;
    let mut text = String::new();
    match cli.command {
        Command::Mesh(MeshCmd::Validate { mesh }) => {
            require_file(&mesh)?;
            let m = load_mesh(&mesh)?;
            let edges = m.edge_graph().edge_count();
            writeln!(text, "{} vertices, {} faces, {edges} edges, OK", m.vertex_count(), m.face_count()).ok();
        }
        Command::Geodesic(GeodesicCmd::Precompute { mesh, sources, out: dst }) => {
            require_file(&mesh)?;
            require_parent(&dst)?;
            let m = load_mesh(&mesh)?;
            let src: Vec<usize> = if sources.trim() == "all" {
                (0..m.vertex_count()).collect()
            } else {
                sources
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|e| Error::Argument(format!("source {s:?}: {e}"))))
                    .collect::<Result<_>>()?
            };
            let cache = GeodesicCache::for_mesh(&m, &src)?;
            cache.save(&dst)?;
            writeln!(
                text,
                "{} sources, {} vertices, g_max {:.6}",
                cache.sources().len(),
                cache.vertex_count(),
                cache.g_max()
            )
            .ok();
        }
        Command::Corr(CorrCmd::Generate(a)) => {
            for p in [&a.mesh, &a.camera, &a.mask] {
                require_file(p)?;
            }
            require_parent(&a.out)?;
            let mesh = load_mesh(&a.mesh)?;
            let camera: Camera = serde_json::from_slice(&std::fs::read(&a.camera)?)?;
            let mask = Mask::from_image(&read_pgm(&a.mask)?);
            let defaults = CountRange::default();
            let count = CountRange::new(
                settings.pick(a.count_min, "count-min", defaults.min)?,
                settings.pick(a.count_max, "count-max", defaults.max)?,
            );
            let meta = ImageMeta { image: a.image, pid: a.pid, cam: a.cam, clothes: a.clothes };
            let set = generate_pseudo_correspondences(&mesh, &camera, &mask, count, &meta, seed)?;
            write_corrs(&a.out, std::slice::from_ref(&set))?;
            writeln!(text, "{}: {} correspondences", set.image, set.entries.len()).ok();
        }
        Command::Corr(CorrCmd::SampleAnnot { parts, out: dst, uniform, k_min, k_max }) => {
            require_file(&parts)?;
            require_parent(&dst)?;
            let d = AnnotationSampling::default();
            let cfg = AnnotationSampling {
                uniform_n: settings.pick(uniform, "uniform", d.uniform_n)?,
                k_min: settings.pick(k_min, "k-min", d.k_min)?,
                k_max: settings.pick(k_max, "k-max", d.k_max)?,
            };
            let img = read_pgm(&parts)?;
            let fg = img.pixels.iter().filter(|&&v| v != 0).count();
            let pixels = sample_annotation_pixels(&img, cfg, seed)?;
            let n_uniform = cfg.uniform_n.min(fg);
            let mut csv = String::from("row,col,kind\n");
            for (i, p) in pixels.iter().enumerate() {
                let kind = if i < n_uniform { "uniform" } else { "centroid" };
                writeln!(csv, "{},{},{kind}", p.row, p.col).ok();
            }
            write_atomic(&dst, csv.as_bytes())?;
            writeln!(text, "{} pixels ({n_uniform} uniform, {} centroids)", pixels.len(), pixels.len() - n_uniform).ok();
        }
        Command::Corr(CorrCmd::Link { corrs, out: dst, links }) => {
            require_file(&corrs)?;
            require_parent(&dst)?;
            let n = settings.pick(links, "links", crate::scene::CROSS_VIEW_LINKS)?;
            let mut sets = read_corrs(&corrs)?;
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    if sets[i].pid != sets[j].pid {
                        continue;
                    }
                    let (left, right) = sets.split_at_mut(j);
                    let r = link_cross_view(&mut left[i], &mut right[0], n)?;
                    writeln!(text, "{} <-> {}: {}/{} linked", left[i].image, right[0].image, r.linked, r.requested).ok();
                }
            }
            write_corrs(&dst, &sets)?;
        }
        Command::Loss(LossCmd::CheckGrad { which, seeds }) => {
            let target: GradTarget = which.parse()?;
            let count = settings.pick(seeds, "seeds", 1u64)?;
            let mut worst: f64 = 0.0;
            for s in seed..seed + count {
                let r = target.check(s)?;
                writeln!(
                    text,
                    "{} seed {s}: max relative error {:.3e} over {} coordinates",
                    target.name(),
                    r.max_rel_error,
                    r.checked
                )
                .ok();
                worst = worst.max(r.max_rel_error);
            }
            out.write_all(text.as_bytes())?;
            if worst >= GRAD_TOLERANCE {
                return Err(Error::Validation(format!("gradient error {worst:.3e} exceeds {GRAD_TOLERANCE:e}")));
            }
            return Ok(());
        }
        Command::TrainToy(a) => {
            let scene = load_scene(&a.scene, seed)?;
            let d = ToyConfig::default();
            let dw = LossWeights::default();
            let weights = LossWeights {
                lambda1: settings.pick(None, "lambda1", dw.lambda1)?,
                alpha: settings.pick(None, "alpha", dw.alpha)?,
                lambda2: settings.pick(None, "lambda2", dw.lambda2)?,
                lambda3: settings.pick(None, "lambda3", dw.lambda3)?,
                margin: settings.pick(None, "margin", dw.margin)?,
            };
            let cfg = ToyConfig {
                steps: settings.pick(a.steps, "steps", d.steps)?,
                learning_rate: settings.pick(a.lr, "lr", d.learning_rate)?,
                temperature: settings.pick(a.temperature, "temperature", d.temperature)?,
                dim: settings.pick(a.dim, "dim", d.dim)?,
                weights,
                seed,
            };
            let result = optimize_embeddings(&scene, &cfg)?;
            std::fs::create_dir_all(&a.out)?;
            for (set, field) in scene.sets.iter().zip(&result.fields) {
                write_field(&a.out.join(format!("field_{}.bin", set.image)), field)?;
            }
            let table = NamedTensor::new("table", vec![result.table.rows(), result.table.dim()], result.table.data().to_vec())?;
            write_tensors(&a.out.join("table.bin"), &[table])?;
            let mut csv = String::from("step,loss\n");
            for (i, v) in result.trace.iter().enumerate() {
                writeln!(csv, "{i},{v:.12e}").ok();
            }
            write_atomic(&a.out.join("trace.csv"), csv.as_bytes())?;
            let (first, last) = (result.trace[0], result.trace[result.trace.len() - 1]);
            writeln!(text, "{} steps, loss {first:.6} -> {last:.6}", cfg.steps).ok();
        }
        Command::Eval(EvalCmd::Gps { gt, pred, cache, sigma, thresholds }) => {
            for p in [&gt, &pred, &cache] {
                require_file(p)?;
            }
            let d = GpsConfig::default();
            let config = GpsConfig {
                sigma: settings.pick(sigma, "sigma", d.sigma)?,
                thresholds: settings.pick_list(thresholds, "thresholds", d.thresholds)?,
            };
            config.validate().map_err(|e| Error::Argument(e.to_string()))?;
            let gt_sets = read_corrs(&gt)?;
            let preds: BTreeMap<String, CorrespondenceSet> =
                read_corrs(&pred)?.into_iter().map(|s| (s.image.clone(), s)).collect();
            let cache = GeodesicCache::load(&cache)?;
            let data: Vec<(CorrespondenceSet, Option<VertexMap>)> = gt_sets
                .into_iter()
                .map(|g| {
                    let map = preds.get(&g.image).map(|p| {
                        let mut data = vec![None; g.height * g.width];
                        for e in &p.entries {
                            if e.pixel.row < g.height && e.pixel.col < g.width {
                                data[e.pixel.row * g.width + e.pixel.col] = Some(e.vertex);
                            }
                        }
                        VertexMap { height: g.height, width: g.width, data }
                    });
                    (g, map)
                })
                .collect();
            text = gps_ap_ar(&data, &cache, &config)?.to_csv();
        }
        Command::Eval(EvalCmd::Reid { features, labels, protocol }) => {
            require_file(&features)?;
            require_file(&labels)?;
            let protocol: Protocol = protocol.parse()?;
            let tensors = read_tensors(&features)?;
            let get = |name: &str| {
                tensors
                    .iter()
                    .find(|t| t.name == name && t.shape.len() == 2)
                    .ok_or_else(|| Error::Validation(format!("{} lacks a 2-D tensor {name:?}", features.display())))
            };
            let (q, g) = (get("query")?, get("gallery")?);
            if q.shape[1] != g.shape[1] {
                return Err(Error::Shape(format!("query dim {} vs gallery dim {}", q.shape[1], g.shape[1])));
            }
            let (ql, gl) = read_labels(&labels)?;
            let inst = RetrievalInstance {
                dim: q.shape[1],
                query: q.data.clone(),
                query_labels: ql,
                gallery: g.data.clone(),
                gallery_labels: gl,
                protocol,
            };
            let r = reid_eval(&inst)?;
            writeln!(text, "protocol,{}", protocol.name()).ok();
            writeln!(text, "mAP,{:.2}", 100.0 * r.map).ok();
            for k in [1, 5, 10] {
                writeln!(text, "CMC@{k},{:.2}", 100.0 * r.rank(k)).ok();
            }
            writeln!(text, "evaluated,{}", r.evaluated).ok();
            writeln!(text, "skipped,{}", r.skipped.len()).ok();
        }
        Command::Viz(VizCmd::Pca { field, out: dst, dims }) => {
            require_file(&field)?;
            require_parent(&dst)?;
            let f = read_field(&field)?;
            let p = pca_project(&f, settings.pick(dims, "dims", 3)?)?;
            write_atomic(&dst, &p.to_ppm())?;
            let ratios: Vec<String> = p.explained_variance_ratio().iter().map(|r| format!("{r:.4}")).collect();
            writeln!(text, "explained variance {}", ratios.join(" ")).ok();
            if p.is_degenerate() {
                writeln!(text, "warning: field has rank {} < {} components", p.rank, p.out_dims).ok();
            }
        }
        Command::SynthScene(a) => {
            let kind: SceneKind = a.kind.parse()?;
            let scene = synth_scene(kind, seed)?;
            scene.save(&a.out)?;
            let counts: Vec<String> = scene.sets.iter().map(|s| format!("{}={}", s.image, s.entries.len())).collect();
            writeln!(text, "{} views, {}, {} links", scene.views.len(), counts.join(" "), scene.sets[0].cross_view.len()).ok();
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn load_scene(arg: &str, seed: u64) -> Result<Scene> {
    let dir = Path::new(arg);
    if dir.is_dir() {
        return Scene::load(dir);
    }
    match arg.parse::<SceneKind>() {
        Ok(kind) => synth_scene(kind, seed),
        Err(_) => Err(Error::Argument(format!("--scene {arg:?} is neither a directory nor a scene kind"))),
    }
}

fn read_labels(path: &Path) -> Result<(Vec<SampleLabels>, Vec<SampleLabels>)> {
    let text = std::fs::read_to_string(path)?;
    let (mut q, mut g) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("split")) {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Parse { line: i + 1, msg: format!("expected split,id,cam,clothes, got {line:?}") };
        if f.len() != 4 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<i64>().map_err(|_| bad());
        let l = SampleLabels { id: num(f[1])?, cam: num(f[2])?, clothes: num(f[3])? };
        match f[0] {
            "query" => q.push(l),
            "gallery" => g.push(l),
            _ => return Err(bad()),
        }
    }
    Ok((q, g))
}
