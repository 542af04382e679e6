//! Config-driven pipeline commands behind the `lidarplace` binary.
//!
//! Every command is deterministic for a given config and seed (timings aside).
//! Clouds are processed on a bounded worker pool and written by a single
//! writer in input order.

pub mod archive;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::{Convention, PointCloud};
use crate::config::{CloudFormat, IntensityScope, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{
    kmeans, recall_at, split_by_areas, DescriptorEntry, DescriptorSet, RecallDepth, RecallResult,
};
use crate::geometry::to_spherical;
use crate::ingest::{self, ColumnSpec};
use crate::intensity::{self, IntensityMode};
use crate::sparse::{quantize, weights_io, Network, QuantizationMode};
use crate::svg;

pub const ARCHIVE_FILE: &str = "processed.lpa";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const DESCRIPTOR_FILE: &str = "descriptors.lpd";
pub const METRICS_FILE: &str = "metrics.csv";
pub const LABELS_FILE: &str = "clusters.csv";
pub const CLUSTER_SVG: &str = "clusters.svg";
pub const BENCH_FILE: &str = "bench.csv";
pub const BENCH_SVG: &str = "bench.svg";

/// Runs `f` on a pool of `jobs` threads (0 = rayon default).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Format(format!("csv encoding: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Cloud files of the configured directory, sorted by file name.
pub fn list_cloud_files(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let dir = config
        .clouds
        .as_ref()
        .ok_or_else(|| Error::Config("dataset.clouds is not set".into()))?;
    let ext = match config.format {
        CloudFormat::Xyzi => "bin",
        CloudFormat::Csv => "csv",
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    match format {
        CloudFormat::Xyzi => ingest::load_xyzi_binary(path),
        CloudFormat::Csv => ingest::load_csv_cloud(path, &ColumnSpec::default()),
    }
}

/// Geometric stages: range filter, optional downsampling, optional spherical transform.
pub fn prepare_geometry(cloud: &PointCloud, config: &PipelineConfig) -> Result<PointCloud> {
    let mut c = ingest::range_filter(cloud, config.r_min, config.r_max)?;
    if let Some(v) = config.voxel_size {
        c = ingest::voxel_downsample(&c, v)?;
    }
    if config.coords == QuantizationMode::Spherical {
        c = to_spherical(&c, &config.sensor_fov()?)?;
    }
    Ok(c)
}

/// Per-scan intensity normalization as configured.
pub fn normalize_intensity(cloud: PointCloud, config: &PipelineConfig) -> Result<PointCloud> {
    if config.intensity == IntensityMode::None {
        return Ok(cloud);
    }
    let Some(values) = cloud.intensity() else {
        return Ok(cloud);
    };
    let out = intensity::normalize(values, config.intensity, config.intensity_bins)?;
    cloud.with_intensity(Some(out))
}

/// Full single-scan preprocessing chain.
pub fn preprocess_cloud(cloud: &PointCloud, config: &PipelineConfig) -> Result<PointCloud> {
    normalize_intensity(prepare_geometry(cloud, config)?, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub source_id: String,
    pub points_loaded: usize,
    pub points_out: usize,
    pub convention: Convention,
}

#[derive(Debug)]
pub struct PreprocessReport {
    pub archive: PathBuf,
    pub manifest: PathBuf,
    pub rows: Vec<ManifestRow>,
    pub failures: Vec<Error>,
}

/// load → range filter → downsample → spherical → intensity, for every cloud file.
///
/// Files that fail are reported in `failures`; the archive holds the rest.
pub fn cmd_preprocess(config: &PipelineConfig, out_dir: &Path, jobs: usize) -> Result<PreprocessReport> {
    ensure_dir(out_dir)?;
    let files = list_cloud_files(config)?;
    let staged: Vec<Result<(PointCloud, usize)>> = with_pool(jobs, || {
        files
            .par_iter()
            .map(|path| {
                let id = ingest::source_id_from_path(path);
                let raw = load_cloud(path, config.format).map_err(|e| e.in_cloud(&id))?;
                let prepared = prepare_geometry(&raw, config).map_err(|e| e.in_cloud(&id))?;
                Ok((prepared, raw.len()))
            })
            .collect()
    })?;

    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for r in staged {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(e),
        }
    }

    let clouds: Vec<PointCloud> = match (config.intensity_scope, config.intensity) {
        (IntensityScope::Run, IntensityMode::Equalize) if ok.iter().all(|c| c.0.intensity().is_some()) && !ok.is_empty() => {
            let scans: Vec<&[f64]> = ok.iter().map(|c| c.0.intensity().expect("checked")).collect();
            let eq = intensity::equalize_shared(&scans, config.intensity_bins)?;
            ok.iter()
                .zip(eq)
                .map(|((c, _), v)| c.clone().with_intensity(Some(v)))
                .collect::<Result<_>>()?
        }
        _ => {
            let normalized: Vec<Result<PointCloud>> = with_pool(jobs, || {
                ok.par_iter()
                    .map(|(c, _)| normalize_intensity(c.clone(), config).map_err(|e| e.in_cloud(c.source_id())))
                    .collect()
            })?;
            let mut v = Vec::new();
            for r in normalized {
                match r {
                    Ok(c) => v.push(c),
                    Err(e) => failures.push(e),
                }
            }
            v
        }
    };

    let loaded: HashMap<&str, usize> = ok.iter().map(|(c, n)| (c.source_id(), *n)).collect();
    let rows: Vec<ManifestRow> = clouds
        .iter()
        .map(|c| ManifestRow {
            source_id: c.source_id().to_string(),
            points_loaded: loaded[c.source_id()],
            points_out: c.len(),
            convention: c.convention(),
        })
        .collect();

    let archive_path = out_dir.join(ARCHIVE_FILE);
    archive::write(&archive_path, &clouds)?;
    let hash = config.hash();
    let manifest_rows: Vec<Vec<String>> = rows
        .iter()
        .zip(&clouds)
        .map(|(r, c)| {
            vec![
                r.source_id.clone(),
                r.points_loaded.to_string(),
                r.points_out.to_string(),
                c.frame().to_string(),
                match r.convention {
                    Convention::Metric => "metric".to_string(),
                    Convention::UnitCube => "unit-cube".to_string(),
                },
                hash.clone(),
            ]
        })
        .collect();
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_file(
        &manifest_path,
        csv_text(
            &["source_id", "points_loaded", "points_out", "frame", "convention", "config_hash"],
            &manifest_rows,
        )?,
    )?;
    for f in &failures {
        log::error!("{f}");
    }
    Ok(PreprocessReport {
        archive: archive_path,
        manifest: manifest_path,
        rows,
        failures,
    })
}

/// Network from the configured weight file, or seeded weights when none is given.
pub fn build_network(config: &PipelineConfig) -> Result<Network> {
    match &config.weights {
        Some(path) => {
            let (graph, weights) = weights_io::read(path)?;
            if graph != config.graph {
                return Err(Error::Config(format!(
                    "weight file {} describes a different graph than graph.layers",
                    path.display()
                )));
            }
            Network::new(graph, weights)
        }
        None => Network::seeded(config.graph.clone(), config.seed),
    }
}

/// One descriptor per archived cloud, joined with its pose.
pub fn cmd_describe(config: &PipelineConfig, archive_path: &Path, out_dir: &Path, jobs: usize) -> Result<(PathBuf, DescriptorSet)> {
    ensure_dir(out_dir)?;
    let clouds = archive::read(archive_path)?;
    let poses_path = config
        .poses
        .as_ref()
        .ok_or_else(|| Error::Config("dataset.poses is not set".into()))?;
    let poses: HashMap<String, crate::cloud::Pose> = ingest::load_poses(poses_path)?
        .into_iter()
        .map(|p| (p.source_id.clone(), p))
        .collect();
    let net = build_network(config)?;
    let spec = config.quantization_spec()?;
    let results: Vec<Result<DescriptorEntry>> = with_pool(jobs, || {
        clouds
            .par_iter()
            .map(|c| {
                let id = c.source_id();
                let pose = poses
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::Data(format!("no pose for source id '{id}'")))?;
                let d = net.describe(c, &spec, config.features).map_err(|e| e.in_cloud(id))?;
                Ok(DescriptorEntry {
                    source_id: id.to_string(),
                    descriptor: d.into_values(),
                    pose,
                })
            })
            .collect()
    })?;
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let set = DescriptorSet::new(config.describe_role, entries)?;
    let path = out_dir.join(DESCRIPTOR_FILE);
    set.write(&path)?;
    Ok((path, set))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub queries: usize,
    pub database: usize,
    pub at_1: RecallResult,
    pub at_1_percent: RecallResult,
}

fn fmt_recall(r: &RecallResult) -> String {
    r.value().map_or_else(|| "undefined".into(), |v| format!("{v:.6}"))
}

/// Recall@1 and Recall@1% of `query` against `database`, restricted to the
/// configured test areas when any are set.
pub fn cmd_eval(config: &PipelineConfig, query: &DescriptorSet, database: &DescriptorSet, out_dir: &Path) -> Result<(PathBuf, EvalReport)> {
    ensure_dir(out_dir)?;
    let areas = &config.eval.test_areas;
    let restrict = |set: &DescriptorSet| -> Result<DescriptorSet> {
        if areas.is_empty() {
            return Ok(set.clone());
        }
        let (inside, _) = split_by_areas(set.entries().to_vec(), areas, |e| &e.pose);
        DescriptorSet::new(set.role(), inside)
    };
    let (q, db) = (restrict(query)?, restrict(database)?);
    let at_1 = recall_at(&q, &db, &config.eval, RecallDepth::Top(1))?;
    let at_1_percent = recall_at(&q, &db, &config.eval, RecallDepth::OnePercent)?;
    let report = EvalReport {
        queries: q.len(),
        database: db.len(),
        at_1,
        at_1_percent,
    };
    let row = vec![
        config.dataset_name.clone(),
        config.eval.positive_threshold.to_string(),
        config.eval.recall_percent_floor.to_string(),
        areas.len().to_string(),
        report.queries.to_string(),
        report.database.to_string(),
        at_1.evaluated.to_string(),
        fmt_recall(&at_1),
        at_1_percent.depth.to_string(),
        fmt_recall(&at_1_percent),
        config.hash(),
    ];
    let path = out_dir.join(METRICS_FILE);
    write_file(
        &path,
        csv_text(
            &[
                "dataset",
                "threshold_m",
                "recall_floor",
                "test_areas",
                "queries",
                "database",
                "evaluated_queries",
                "recall_at_1",
                "top_n_1pct",
                "recall_at_1pct",
                "config_hash",
            ],
            &[row],
        )?,
    )?;
    Ok((path, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub labels_csv: PathBuf,
    pub svg: PathBuf,
    pub labels: Vec<usize>,
}

/// k-means over descriptors; labels joined to poses plus a scatter plot of poses.
pub fn cmd_cluster(config: &PipelineConfig, set: &DescriptorSet, out_dir: &Path) -> Result<ClusterReport> {
    ensure_dir(out_dir)?;
    let data: Vec<Vec<f64>> = set.entries().iter().map(|e| e.descriptor.clone()).collect();
    if config.cluster_k > data.len() {
        return Err(Error::Parameter(format!(
            "cluster.k = {} exceeds {} descriptors",
            config.cluster_k,
            data.len()
        )));
    }
    let km = kmeans(&data, config.cluster_k, config.cluster_seed)?;
    let hash = config.hash();
    let rows: Vec<Vec<String>> = set
        .entries()
        .iter()
        .zip(&km.labels)
        .map(|(e, l)| {
            vec![
                e.source_id.clone(),
                e.pose.x.to_string(),
                e.pose.y.to_string(),
                l.to_string(),
                hash.clone(),
            ]
        })
        .collect();
    let labels_csv = out_dir.join(LABELS_FILE);
    write_file(&labels_csv, csv_text(&["source_id", "x", "y", "label", "config_hash"], &rows)?)?;
    let pts: Vec<(f64, f64, usize)> = set
        .entries()
        .iter()
        .zip(&km.labels)
        .map(|(e, &l)| (e.pose.x, e.pose.y, l))
        .collect();
    let svg_path = out_dir.join(CLUSTER_SVG);
    write_file(
        &svg_path,
        svg::scatter(&format!("{}: k-means, k = {}", config.dataset_name, config.cluster_k), &pts),
    )?;
    Ok(ClusterReport {
        labels_csv,
        svg: svg_path,
        labels: km.labels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub points: usize,
    pub repetitions: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
}

/// Seeded synthetic scan: points in a 3–50 m shell with 8-bit style intensities.
pub fn synthetic_scan(points: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(points);
    let mut inten = Vec::with_capacity(points);
    for _ in 0..points {
        let r = rng.gen_range(3.0..50.0);
        let az = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let el = rng.gen_range(-0.26..0.26f64);
        pts.push([r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin()]);
        inten.push(rng.gen_range(0.0..255.0f64).floor());
    }
    PointCloud::cartesian(pts, Some(inten))
        .expect("synthetic points are finite")
        .with_source_id(format!("synthetic-{points}"))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Times preprocessing + quantization + forward pass for each cloud size.
pub fn cmd_bench(config: &PipelineConfig, sizes: &[usize], out_dir: &Path) -> Result<(PathBuf, Vec<BenchRow>)> {
    ensure_dir(out_dir)?;
    let net = build_network(config)?;
    let spec = config.quantization_spec()?;
    let reps = config.bench_repetitions.max(20);
    let mut rows = Vec::new();
    for &n in sizes {
        let cloud = synthetic_scan(n, config.seed ^ n as u64);
        // warm-up pass, not timed
        let pre = preprocess_cloud(&cloud, config)?;
        net.forward(&quantize(&pre, &spec, config.features)?)?;
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t0 = Instant::now();
            let pre = preprocess_cloud(&cloud, config)?;
            let tensor = quantize(&pre, &spec, config.features)?;
            std::hint::black_box(net.forward(&tensor)?);
            times.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            points: n,
            repetitions: reps,
            median_ms: percentile(&times, 0.5),
            p95_ms: percentile(&times, 0.95),
        });
    }
    let hash = config.hash();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.points.to_string(),
                r.repetitions.to_string(),
                format!("{:.4}", r.median_ms),
                format!("{:.4}", r.p95_ms),
                hash.clone(),
            ]
        })
        .collect();
    let path = out_dir.join(BENCH_FILE);
    write_file(&path, csv_text(&["points", "repetitions", "median_ms", "p95_ms", "config_hash"], &csv_rows)?)?;
    let median: Vec<(f64, f64)> = rows.iter().map(|r| (r.points as f64, r.median_ms)).collect();
    let p95: Vec<(f64, f64)> = rows.iter().map(|r| (r.points as f64, r.p95_ms)).collect();
    write_file(
        &out_dir.join(BENCH_SVG),
        svg::line_plot("inference time (ms) vs points", &[("median", median), ("p95", p95)]),
    )?;
    Ok((path, rows))
}
