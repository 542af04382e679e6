//! Pipeline configuration: a flat `key = value` file with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored, as is anything after a
//! `#` that follows whitespace. Unknown keys are
//! rejected. [`PipelineConfig::to_text`] writes every key in a fixed order, so
//! parsing the output yields an identical config and the text hash identifies it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{EvalProtocol, Role, TestArea};
use crate::geometry::{SensorFov, SensorPreset};
use crate::intensity::{IntensityMode, DEFAULT_BINS};
use crate::sparse::{FeatureMode, LayerGraph, QuantizationMode, QuantizationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyzi,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityScope {
    /// One histogram per scan.
    Scan,
    /// One histogram shared by every scan of the run.
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AzimuthWrap {
    /// Wrap when the coordinates are spherical and the sensor covers 360°.
    Auto,
    On,
    Off,
}

/// Training hyperparameters, kept as metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMetadata {
    pub batch_size: usize,
    pub split_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_milestones: Vec<usize>,
    pub weight_decay: f64,
    pub tau: f64,
}

impl Default for TrainingMetadata {
    fn default() -> Self {
        Self {
            batch_size: 2048,
            split_size: 16,
            epochs: 400,
            initial_lr: 1e-3,
            lr_milestones: vec![250, 350],
            weight_decay: 1e-4,
            tau: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset_name: String,
    /// Directory of cloud files.
    pub clouds: Option<PathBuf>,
    pub format: CloudFormat,
    pub poses: Option<PathBuf>,
    pub sensor: SensorPreset,
    pub azimuth_offset_deg: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub voxel_size: Option<f64>,
    pub coords: QuantizationMode,
    pub intensity: IntensityMode,
    pub intensity_bins: usize,
    pub intensity_scope: IntensityScope,
    /// One uniform step or an explicit (axis 0, axis 1, axis 2) triple.
    pub quantize_steps: Vec<f64>,
    pub features: FeatureMode,
    pub wrap_azimuth: AzimuthWrap,
    pub graph: LayerGraph,
    pub weights: Option<PathBuf>,
    pub seed: u64,
    pub describe_role: Role,
    pub eval: EvalProtocol,
    pub cluster_k: usize,
    pub cluster_seed: u64,
    pub bench_sizes: Vec<usize>,
    pub bench_repetitions: usize,
    pub training: TrainingMetadata,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_name: "unnamed".into(),
            clouds: None,
            format: CloudFormat::Xyzi,
            poses: None,
            sensor: SensorPreset::Vlp16,
            azimuth_offset_deg: 0.0,
            r_min: 0.0,
            r_max: f64::INFINITY,
            voxel_size: None,
            coords: QuantizationMode::Cartesian,
            intensity: IntensityMode::Equalize,
            intensity_bins: DEFAULT_BINS,
            intensity_scope: IntensityScope::Scan,
            quantize_steps: vec![0.1],
            features: FeatureMode::Intensity,
            wrap_azimuth: AzimuthWrap::Auto,
            graph: LayerGraph::desk(1),
            weights: None,
            seed: 0,
            describe_role: Role::Database,
            eval: EvalProtocol::default(),
            cluster_k: 10,
            cluster_seed: 0,
            bench_sizes: vec![4096, 25000],
            bench_repetitions: 20,
            training: TrainingMetadata::default(),
        }
    }
}

fn cfg_err(line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}, key '{key}': {msg}"))
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| cfg_err(line, key, format!("cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| parse_num(line, key, x.trim())).collect()
}

fn parse_opt_path(v: &str) -> Option<PathBuf> {
    (v != "none" && !v.is_empty()).then(|| PathBuf::from(v))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            // a '#' preceded by whitespace starts a trailing comment
            let content = raw.split_once(" #").or_else(|| raw.split_once("\t#")).map_or(raw, |(c, _)| c);
            let trimmed = content.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected 'key = value'")))?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "dataset.name" => c.dataset_name = v.to_string(),
                "dataset.clouds" => c.clouds = parse_opt_path(v),
                "dataset.format" => {
                    c.format = match v {
                        "xyzi" => CloudFormat::Xyzi,
                        "csv" => CloudFormat::Csv,
                        _ => return Err(cfg_err(line, key, "expected xyzi or csv")),
                    }
                }
                "dataset.poses" => c.poses = parse_opt_path(v),
                "sensor.preset" => c.sensor = v.parse().map_err(|e| cfg_err(line, key, e))?,
                "sensor.azimuth_offset_deg" => c.azimuth_offset_deg = parse_num(line, key, v)?,
                "filter.r_min" => c.r_min = parse_num(line, key, v)?,
                "filter.r_max" => c.r_max = parse_num(line, key, v)?,
                "preprocess.voxel_size" => {
                    c.voxel_size = if v == "none" { None } else { Some(parse_num(line, key, v)?) }
                }
                "coords.mode" => {
                    c.coords = match v {
                        "cartesian" => QuantizationMode::Cartesian,
                        "spherical" => QuantizationMode::Spherical,
                        _ => return Err(cfg_err(line, key, "expected cartesian or spherical")),
                    }
                }
                "intensity.mode" => c.intensity = v.parse().map_err(|e| cfg_err(line, key, e))?,
                "intensity.bins" => c.intensity_bins = parse_num(line, key, v)?,
                "intensity.scope" => {
                    c.intensity_scope = match v {
                        "scan" => IntensityScope::Scan,
                        "run" => IntensityScope::Run,
                        _ => return Err(cfg_err(line, key, "expected scan or run")),
                    }
                }
                "quantize.steps" => c.quantize_steps = parse_list(line, key, v)?,
                "quantize.features" => c.features = v.parse().map_err(|e| cfg_err(line, key, e))?,
                "quantize.wrap_azimuth" => {
                    c.wrap_azimuth = match v {
                        "auto" => AzimuthWrap::Auto,
                        "true" => AzimuthWrap::On,
                        "false" => AzimuthWrap::Off,
                        _ => return Err(cfg_err(line, key, "expected auto, true or false")),
                    }
                }
                "graph.layers" => {
                    c.graph = if v == "desk" {
                        LayerGraph::desk(1)
                    } else {
                        v.parse().map_err(|e| cfg_err(line, key, e))?
                    }
                }
                "graph.weights" => c.weights = parse_opt_path(v),
                "graph.seed" => c.seed = parse_num(line, key, v)?,
                "describe.role" => c.describe_role = v.parse().map_err(|e| cfg_err(line, key, e))?,
                "eval.threshold_m" => c.eval.positive_threshold = parse_num(line, key, v)?,
                "eval.recall_floor" => c.eval.recall_percent_floor = parse_num(line, key, v)?,
                "eval.exclude_self" => c.eval.exclude_same_source = parse_num(line, key, v)?,
                "eval.areas" => c.eval.test_areas = parse_areas(line, key, v)?,
                "cluster.k" => c.cluster_k = parse_num(line, key, v)?,
                "cluster.seed" => c.cluster_seed = parse_num(line, key, v)?,
                "bench.sizes" => c.bench_sizes = parse_list(line, key, v)?,
                "bench.repetitions" => c.bench_repetitions = parse_num(line, key, v)?,
                "train.batch_size" => c.training.batch_size = parse_num(line, key, v)?,
                "train.split_size" => c.training.split_size = parse_num(line, key, v)?,
                "train.epochs" => c.training.epochs = parse_num(line, key, v)?,
                "train.initial_lr" => c.training.initial_lr = parse_num(line, key, v)?,
                "train.lr_milestones" => c.training.lr_milestones = parse_list(line, key, v)?,
                "train.weight_decay" => c.training.weight_decay = parse_num(line, key, v)?,
                "train.tau" => c.training.tau = parse_num(line, key, v)?,
                _ => return Err(cfg_err(line, key, "unknown key")),
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file, resolving relative paths against its directory and
    /// checking that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.clouds, &mut c.poses, &mut c.weights].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(Error::Config(format!("referenced path {} does not exist", p.display())));
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.r_min >= 0.0 && self.r_min < self.r_max) {
            return bad(format!("filter bounds must satisfy 0 <= r_min < r_max, got {} and {}", self.r_min, self.r_max));
        }
        if let Some(v) = self.voxel_size {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("voxel size must be positive, got {v}"));
            }
        }
        match (self.coords, self.quantize_steps.len()) {
            (QuantizationMode::Spherical, 3) | (QuantizationMode::Cartesian, 1 | 3) => {}
            (QuantizationMode::Spherical, _) => {
                return bad("spherical coordinates need an explicit (r, theta, phi) step triple".into())
            }
            _ => return bad("quantize.steps takes one value or three".into()),
        }
        if self.intensity_bins < 2 {
            return bad("intensity.bins must be at least 2".into());
        }
        if self.wrap_azimuth == AzimuthWrap::On && self.coords != QuantizationMode::Spherical {
            return bad("azimuth wrapping requires spherical coordinates".into());
        }
        self.quantization_spec()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.sensor_fov().map_err(|e| Error::Config(e.to_string()))?;
        self.graph.validate().map_err(|e| Error::Config(format!("graph: {e}")))?;
        self.eval.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.cluster_k == 0 {
            return bad("cluster.k must be at least 1".into());
        }
        if self.bench_repetitions == 0 || self.bench_sizes.contains(&0) {
            return bad("benchmark sizes and repetitions must be positive".into());
        }
        Ok(())
    }

    pub fn sensor_fov(&self) -> Result<SensorFov> {
        let fov = self.sensor.fov().with_azimuth_offset(self.azimuth_offset_deg);
        fov.validate()?;
        Ok(fov)
    }

    pub fn quantization_spec(&self) -> Result<QuantizationSpec> {
        let steps = match self.quantize_steps.as_slice() {
            [s] => [*s; 3],
            [a, b, c] => [*a, *b, *c],
            _ => return Err(Error::Config("quantize.steps takes one value or three".into())),
        };
        let wrap = match self.wrap_azimuth {
            AzimuthWrap::On => true,
            AzimuthWrap::Off => false,
            AzimuthWrap::Auto => {
                self.coords == QuantizationMode::Spherical && self.sensor.fov().is_full_circle()
            }
        };
        QuantizationSpec::new(self.coords, steps, wrap)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("dataset.name", self.dataset_name.clone());
        kv("dataset.clouds", opt_path(&self.clouds));
        kv(
            "dataset.format",
            match self.format {
                CloudFormat::Xyzi => "xyzi",
                CloudFormat::Csv => "csv",
            }
            .into(),
        );
        kv("dataset.poses", opt_path(&self.poses));
        kv("sensor.preset", self.sensor.name().into());
        kv("sensor.azimuth_offset_deg", self.azimuth_offset_deg.to_string());
        kv("filter.r_min", self.r_min.to_string());
        kv("filter.r_max", self.r_max.to_string());
        kv(
            "preprocess.voxel_size",
            self.voxel_size.map_or_else(|| "none".into(), |v| v.to_string()),
        );
        kv(
            "coords.mode",
            match self.coords {
                QuantizationMode::Cartesian => "cartesian",
                QuantizationMode::Spherical => "spherical",
            }
            .into(),
        );
        kv("intensity.mode", self.intensity.to_string());
        kv("intensity.bins", self.intensity_bins.to_string());
        kv(
            "intensity.scope",
            match self.intensity_scope {
                IntensityScope::Scan => "scan",
                IntensityScope::Run => "run",
            }
            .into(),
        );
        kv("quantize.steps", join(&self.quantize_steps));
        kv("quantize.features", self.features.to_string());
        kv(
            "quantize.wrap_azimuth",
            match self.wrap_azimuth {
                AzimuthWrap::Auto => "auto",
                AzimuthWrap::On => "true",
                AzimuthWrap::Off => "false",
            }
            .into(),
        );
        kv("graph.layers", self.graph.to_string());
        kv("graph.weights", opt_path(&self.weights));
        kv("graph.seed", self.seed.to_string());
        kv("describe.role", self.describe_role.name().into());
        kv("eval.threshold_m", self.eval.positive_threshold.to_string());
        kv("eval.recall_floor", self.eval.recall_percent_floor.to_string());
        kv("eval.exclude_self", self.eval.exclude_same_source.to_string());
        kv("eval.areas", format_areas(&self.eval.test_areas));
        kv("cluster.k", self.cluster_k.to_string());
        kv("cluster.seed", self.cluster_seed.to_string());
        kv("bench.sizes", join(&self.bench_sizes));
        kv("bench.repetitions", self.bench_repetitions.to_string());
        kv("train.batch_size", self.training.batch_size.to_string());
        kv("train.split_size", self.training.split_size.to_string());
        kv("train.epochs", self.training.epochs.to_string());
        kv("train.initial_lr", self.training.initial_lr.to_string());
        kv("train.lr_milestones", join(&self.training.lr_milestones));
        kv("train.weight_decay", self.training.weight_decay.to_string());
        kv("train.tau", self.training.tau.to_string());
        s
    }

    /// First 16 hex digits of the SHA-256 of [`PipelineConfig::to_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn parse_areas(line: usize, key: &str, v: &str) -> Result<Vec<TestArea>> {
    if v == "none" || v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|chunk| {
            let nums: Vec<f64> = parse_list(line, key, chunk.trim())?;
            match nums.as_slice() {
                [x, y, side] => TestArea::new(*x, *y, *side).map_err(|e| cfg_err(line, key, e)),
                _ => Err(cfg_err(line, key, "each area is 'center_x,center_y,side'")),
            }
        })
        .collect()
}

fn format_areas(areas: &[TestArea]) -> String {
    if areas.is_empty() {
        return "none".into();
    }
    areas
        .iter()
        .map(|a| format!("{},{},{}", a.center_x, a.center_y, a.side))
        .collect::<Vec<_>>()
        .join("; ")
}
