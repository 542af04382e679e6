mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use lidarplace::cli::{self, archive};
use lidarplace::config::PipelineConfig;
use lidarplace::eval::{recall_at, DescriptorEntry, DescriptorSet, EvalProtocol, RecallDepth, Role};
use lidarplace::ingest::{write_poses, write_xyzi_binary};
use lidarplace::{Error, Frame, PointCloud, Pose};
use rand::Rng;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// `n` scans along a short stretch of road with a pose file and a config.
    fn new(n: usize, extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clouds = dir.path().join("clouds");
        std::fs::create_dir(&clouds).unwrap();
        let world = common::LoopWorld::new(1, 30.0, 80);
        let mut poses = Vec::new();
        for k in 0..n {
            let (x, y) = world.position(k as f64 * 0.3);
            let id = format!("{k:06}");
            write_xyzi_binary(clouds.join(format!("{id}.bin")), &world.scan(x, y, 25.0, k as u64)).unwrap();
            poses.push(Pose::new(id, k as f64, x, y, None).unwrap());
        }
        write_poses(dir.path().join("poses.csv"), &poses).unwrap();
        std::fs::write(
            dir.path().join("run.cfg"),
            format!(
                "dataset.name = fixture\ndataset.clouds = clouds\ndataset.poses = poses.csv\n\
                 sensor.preset = hdl64e\ncoords.mode = spherical\nintensity.mode = equalize\n\
                 quantize.steps = 0.2, 4.0, 3.75\ncluster.k = 2\n{extra}"
            ),
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn config(&self) -> PipelineConfig {
        PipelineConfig::load(self.path("run.cfg")).unwrap()
    }
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path).unwrap().headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn preprocess_writes_spherical_equalized_archive_and_manifest() {
    let f = Fixture::new(3, "");
    let out = f.path("out");
    let report = cli::cmd_preprocess(&f.config(), &out, 2).unwrap();
    assert!(report.failures.is_empty());
    let clouds = archive::read(&report.archive).unwrap();
    assert_eq!(clouds.len(), 3);
    for c in &clouds {
        assert_eq!(c.frame(), Frame::Spherical);
        assert!(c.intensity().unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert_eq!(csv_rows(&report.manifest).len(), 3);
    assert_eq!(header(&report.manifest).last().unwrap(), "config_hash");
}

#[test]
fn voxel_none_keeps_point_counts() {
    let f = Fixture::new(2, "preprocess.voxel_size = none\n");
    let report = cli::cmd_preprocess(&f.config(), &f.path("out"), 1).unwrap();
    for r in &report.rows {
        assert_eq!(r.points_loaded, r.points_out);
    }
    let f = Fixture::new(2, "preprocess.voxel_size = 2.0\n");
    let report = cli::cmd_preprocess(&f.config(), &f.path("out"), 1).unwrap();
    assert!(report.rows.iter().all(|r| r.points_out < r.points_loaded));
}

#[test]
fn bad_files_are_collected_not_fatal() {
    let f = Fixture::new(2, "");
    std::fs::write(f.path("clouds/broken.bin"), [0u8; 7]).unwrap();
    let report = cli::cmd_preprocess(&f.config(), &f.path("out"), 1).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.failures.len(), 1);
    assert!(report.failures[0].to_string().contains("broken"), "{}", report.failures[0]);
}

#[test]
fn describe_emits_one_descriptor_per_cloud_deterministically() {
    let f = Fixture::new(10, "");
    let c = f.config();
    let report = cli::cmd_preprocess(&c, &f.path("out"), 2).unwrap();
    let (path, set) = cli::cmd_describe(&c, &report.archive, &f.path("out"), 2).unwrap();
    assert_eq!(set.len(), 10);
    assert_eq!(set.dim(), c.graph.output_dim().unwrap());
    let first = std::fs::read(&path).unwrap();
    let (path2, _) = cli::cmd_describe(&c, &report.archive, &f.path("again"), 1).unwrap();
    assert_eq!(first, std::fs::read(path2).unwrap());
}

#[test]
fn describe_names_missing_poses_and_empty_clouds() {
    let f = Fixture::new(2, "");
    let c = f.config();
    let stray = PointCloud::cartesian(vec![[1.0, 2.0, 3.0]], Some(vec![0.5])).unwrap().with_source_id("stray");
    archive::write(f.path("a.lpa"), &[stray]).unwrap();
    let e = cli::cmd_describe(&c, &f.path("a.lpa"), &f.path("out"), 1).unwrap_err();
    assert!(matches!(e, Error::Data(_)) && e.to_string().contains("stray"), "{e}");

    let empty = PointCloud::cartesian(vec![], None).unwrap().with_source_id("000001");
    archive::write(f.path("b.lpa"), &[empty]).unwrap();
    let e = cli::cmd_describe(&c, &f.path("b.lpa"), &f.path("out"), 1).unwrap_err();
    assert!(e.to_string().contains("000001"), "{e}");
}

fn loop_sets(seed: u64) -> (DescriptorSet, DescriptorSet) {
    // descriptor = noisy encoding of position on a 60-sample loop, two laps
    let mut rng = common::rng(seed);
    let mut lap = |lap: usize, role: Role| {
        let entries = (0..60)
            .map(|k| {
                let a = (k as f64 + 0.3 * lap as f64) * std::f64::consts::TAU / 60.0;
                let (x, y) = (100.0 * a.cos(), 100.0 * a.sin());
                let id = format!("lap{lap}-{k}");
                DescriptorEntry {
                    source_id: id.clone(),
                    descriptor: vec![x + rng.gen_range(-8.0..8.0), y + rng.gen_range(-8.0..8.0)],
                    pose: Pose::new(id, k as f64, x, y, None).unwrap(),
                }
            })
            .collect();
        DescriptorSet::new(role, entries).unwrap()
    };
    (lap(1, Role::Query), lap(0, Role::Database))
}

#[test]
fn eval_writes_metrics_matching_recall() {
    let f = Fixture::new(1, "eval.threshold_m = 15\n");
    let (q, db) = loop_sets(3);
    let (path, report) = cli::cmd_eval(&f.config(), &q, &db, &f.path("out")).unwrap();
    let protocol = EvalProtocol { positive_threshold: 15.0, ..Default::default() };
    assert_eq!(report.at_1, recall_at(&q, &db, &protocol, RecallDepth::Top(1)).unwrap());
    assert_eq!(report.at_1_percent, recall_at(&q, &db, &protocol, RecallDepth::OnePercent).unwrap());
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 1);
    let h = header(&path);
    let col = |name: &str| rows[0][h.iter().position(|c| c == name).unwrap()].to_string();
    assert_eq!(col("evaluated_queries"), "60");
    assert_eq!(col("config_hash"), f.config().hash());

    let (_, same) = cli::cmd_eval(&f.config(), &db, &db, &f.path("out")).unwrap();
    assert_eq!(same.at_1.value(), Some(1.0));
}

#[test]
fn eval_restricts_to_test_areas() {
    let f = Fixture::new(1, "eval.areas = 100, 0, 40\n");
    let (q, db) = loop_sets(4);
    let (_, report) = cli::cmd_eval(&f.config(), &q, &db, &f.path("out")).unwrap();
    assert!(report.queries > 0 && report.queries < 60);
}

#[test]
fn cluster_writes_labels_and_one_circle_per_descriptor() {
    let f = Fixture::new(1, "");
    let (_, db) = loop_sets(5);
    let report = cli::cmd_cluster(&f.config(), &db, &f.path("out")).unwrap();
    assert_eq!(csv_rows(&report.labels_csv).len(), 60);
    let svg = std::fs::read_to_string(&report.svg).unwrap();
    assert_eq!(svg.matches("<circle").count(), 60);
    assert!(report.labels.iter().all(|&l| l < 2));

    let mut c = f.config();
    c.cluster_k = 1;
    let one = cli::cmd_cluster(&c, &db, &f.path("one")).unwrap();
    let svg = std::fs::read_to_string(&one.svg).unwrap();
    assert_eq!(svg.matches(&lidarplace::svg::cluster_color(0)).count(), 60);
    c.cluster_k = 61;
    assert!(matches!(cli::cmd_cluster(&c, &db, &f.path("x")), Err(Error::Parameter(_))));
}

#[test]
fn bench_reports_median_and_p95_per_size() {
    let f = Fixture::new(1, "bench.repetitions = 20\n");
    let (path, rows) = cli::cmd_bench(&f.config(), &[256, 1024], &f.path("out")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.repetitions >= 20 && r.p95_ms >= r.median_ms));
    assert_eq!(csv_rows(&path).len(), 2);
    assert_eq!(header(&path), ["points", "repetitions", "median_ms", "p95_ms", "config_hash"]);
    let svg = std::fs::read_to_string(f.path("out/bench.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lidarplace"))
}

#[test]
fn binary_exit_codes() {
    let f = Fixture::new(2, "");
    let ok = bin().args(["preprocess", "--config"]).arg(f.path("run.cfg")).arg("--out").arg(f.path("out")).status().unwrap();
    assert_eq!(ok.code(), Some(0));
    let ok = bin().args(["describe", "--config"]).arg(f.path("run.cfg")).arg("--out").arg(f.path("out")).status().unwrap();
    assert_eq!(ok.code(), Some(0));

    std::fs::write(f.path("bad.cfg"), "coords.mode = sideways\n").unwrap();
    let bad = bin().args(["preprocess", "--config"]).arg(f.path("bad.cfg")).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let none = bin().arg("preprocess").output().unwrap();
    assert_eq!(none.status.code(), Some(2));

    std::fs::write(f.path("clouds/zz.bin"), [1u8; 5]).unwrap();
    let data = bin().args(["preprocess", "--config"]).arg(f.path("run.cfg")).arg("--out").arg(f.path("out2")).output().unwrap();
    assert_eq!(data.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&data.stderr).contains("zz"));
}
