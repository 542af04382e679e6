//! Python bindings: point-cloud preprocessing, descriptors, recall and clustering.
//!
//! Arrays cross the boundary as plain lists: points as `[[x, y, z], ...]`,
//! descriptors as `[float, ...]`.

use lidarplace::config::PipelineConfig;
use lidarplace::eval::{self, DescriptorEntry, DescriptorSet, EvalProtocol, RecallDepth, Role};
use lidarplace::geometry::{self, SensorPreset};
use lidarplace::intensity::{self, IntensityMode};
use lidarplace::sparse::{self, FeatureMode, QuantizationSpec};
use lidarplace::{cli, ingest, Error};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A point cloud in the Cartesian or spherical frame.
#[pyclass(name = "PointCloud", module = "lidarplace_py")]
#[derive(Clone)]
struct PyPointCloud {
    inner: lidarplace::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (points, intensity=None, source_id=String::new()))]
    fn new(points: Vec<[f64; 3]>, intensity: Option<Vec<f64>>, source_id: String) -> PyResult<Self> {
        let inner = lidarplace::PointCloud::cartesian(points, intensity).map_err(py_err)?;
        Ok(Self { inner: inner.with_source_id(source_id) })
    }

    /// Loads a binary `.bin` scan of little-endian float32 x, y, z, intensity records.
    #[staticmethod]
    fn load_xyzi(path: &str) -> PyResult<Self> {
        Ok(Self { inner: ingest::load_xyzi_binary(path).map_err(py_err)? })
    }

    #[getter]
    fn points(&self) -> Vec<[f64; 3]> {
        self.inner.points().to_vec()
    }

    #[getter]
    fn intensity(&self) -> Option<Vec<f64>> {
        self.inner.intensity().map(<[f64]>::to_vec)
    }

    #[getter]
    fn frame(&self) -> &'static str {
        self.inner.frame().name()
    }

    #[getter]
    fn source_id(&self) -> String {
        self.inner.source_id().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(id={:?}, points={}, frame={})", self.inner.source_id(), self.inner.len(), self.inner.frame())
    }

    fn range_filter(&self, r_min: f64, r_max: f64) -> PyResult<Self> {
        Ok(Self { inner: ingest::range_filter(&self.inner, r_min, r_max).map_err(py_err)? })
    }

    fn voxel_downsample(&self, voxel_size: f64) -> PyResult<Self> {
        Ok(Self { inner: ingest::voxel_downsample(&self.inner, voxel_size).map_err(py_err)? })
    }

    /// Converts to (range, azimuth°, polar°) using a sensor preset's field of view.
    #[pyo3(signature = (sensor="hdl64e"))]
    fn to_spherical(&self, sensor: &str) -> PyResult<Self> {
        let preset: SensorPreset = sensor.parse().map_err(py_err)?;
        Ok(Self { inner: geometry::to_spherical(&self.inner, &preset.fov()).map_err(py_err)? })
    }

    fn to_cartesian(&self) -> PyResult<Self> {
        Ok(Self { inner: geometry::from_spherical(&self.inner).map_err(py_err)? })
    }

    /// Replaces intensities with their `none`, `minmax` or `equalize` normalization.
    #[pyo3(signature = (mode="equalize", bins=256))]
    fn normalize_intensity(&self, mode: &str, bins: usize) -> PyResult<Self> {
        let mode: IntensityMode = mode.parse().map_err(py_err)?;
        let values = self
            .inner
            .intensity()
            .ok_or_else(|| PyValueError::new_err("cloud has no intensity channel"))?;
        let out = intensity::normalize(values, mode, bins).map_err(py_err)?;
        Ok(Self { inner: self.inner.clone().with_intensity(Some(out)).map_err(py_err)? })
    }
}

/// Pipeline configuration in the flat `key = value` format.
#[pyclass(name = "Config", module = "lidarplace_py")]
#[derive(Clone)]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text=""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self { inner: PipelineConfig::parse(text).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: PipelineConfig::load(path).map_err(py_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// Runs the configured range filter, downsampling, frame change and intensity normalization.
    fn preprocess(&self, cloud: &PyPointCloud) -> PyResult<PyPointCloud> {
        Ok(PyPointCloud { inner: cli::preprocess_cloud(&cloud.inner, &self.inner).map_err(py_err)? })
    }
}

/// Sparse-convolution U-Net producing one global descriptor per cloud.
#[pyclass(name = "Network", module = "lidarplace_py")]
struct PyNetwork {
    inner: sparse::Network,
}

#[pymethods]
impl PyNetwork {
    /// Seeded network for `graph` (layer syntax, or "desk" for the default U-Net).
    #[new]
    #[pyo3(signature = (graph="desk", seed=0))]
    fn new(graph: &str, seed: u64) -> PyResult<Self> {
        let graph = if graph == "desk" { sparse::LayerGraph::desk(1) } else { graph.parse().map_err(py_err)? };
        Ok(Self { inner: sparse::Network::seeded(graph, seed).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (g, w) = sparse::weights_io::read(path).map_err(py_err)?;
        Ok(Self { inner: sparse::Network::new(g, w).map_err(py_err)? })
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn graph(&self) -> String {
        self.inner.graph().to_string()
    }

    /// Descriptor of `cloud` quantized with the config's steps and feature mode.
    fn describe(&self, cloud: &PyPointCloud, config: &PyConfig) -> PyResult<Vec<f64>> {
        let spec = config.inner.quantization_spec().map_err(py_err)?;
        let d = self.inner.describe(&cloud.inner, &spec, config.inner.features).map_err(py_err)?;
        Ok(d.into_values())
    }
}

/// Number of occupied voxels of `cloud` under a Cartesian step or spherical step triple.
#[pyfunction]
#[pyo3(signature = (cloud, steps, wrap_azimuth=true))]
fn occupied_voxels(cloud: &PyPointCloud, steps: Vec<f64>, wrap_azimuth: bool) -> PyResult<usize> {
    let spec = match steps.as_slice() {
        [s] => QuantizationSpec::cartesian(*s),
        [a, b, c] if cloud.inner.frame() == lidarplace::Frame::Spherical => QuantizationSpec::spherical([*a, *b, *c], wrap_azimuth),
        [a, b, c] => QuantizationSpec::new(sparse::QuantizationMode::Cartesian, [*a, *b, *c], false),
        _ => return Err(PyValueError::new_err("steps takes one value or three")),
    }
    .map_err(py_err)?;
    Ok(sparse::quantize(&cloud.inner, &spec, FeatureMode::Ones).map_err(py_err)?.len())
}

/// Histogram-equalized copy of `values` in [0, 1].
#[pyfunction]
#[pyo3(signature = (values, bins=256))]
fn equalize(values: Vec<f64>, bins: usize) -> PyResult<Vec<f64>> {
    intensity::equalize(&values, bins).map_err(py_err)
}

type Rows = Vec<(String, Vec<f64>, (f64, f64))>;

fn descriptor_set(rows: Rows, role: Role) -> PyResult<DescriptorSet> {
    let entries = rows
        .into_iter()
        .map(|(id, d, (x, y))| {
            let pose = lidarplace::Pose::new(id.clone(), 0.0, x, y, None).map_err(py_err)?;
            Ok(DescriptorEntry { source_id: id, descriptor: d, pose })
        })
        .collect::<PyResult<Vec<_>>>()?;
    DescriptorSet::new(role, entries).map_err(py_err)
}

/// Recall of `queries` against `database`, each a list of `(id, descriptor, (x, y))`.
///
/// `n` is a candidate count or the string "1%". Returns None when no query has a
/// database entry within `threshold` meters.
#[pyfunction]
#[pyo3(signature = (queries, database, n=None, threshold=25.0))]
fn recall_at(queries: Rows, database: Rows, n: Option<Bound<'_, PyAny>>, threshold: f64) -> PyResult<Option<f64>> {
    let depth = match n {
        None => RecallDepth::Top(1),
        Some(v) => match v.extract::<usize>() {
            Ok(k) => RecallDepth::Top(k),
            Err(_) if v.extract::<String>().is_ok_and(|s| s == "1%") => RecallDepth::OnePercent,
            Err(_) => return Err(PyValueError::new_err("n must be a positive integer or \"1%\"")),
        },
    };
    let protocol = EvalProtocol { positive_threshold: threshold, ..Default::default() };
    let q = descriptor_set(queries, Role::Query)?;
    let db = descriptor_set(database, Role::Database)?;
    Ok(eval::recall_at(&q, &db, &protocol, depth).map_err(py_err)?.value())
}

/// Sigmoid-relaxed average precision of one ranking.
#[pyfunction]
#[pyo3(signature = (scores, positives, tau=0.01, truncation=None))]
fn smooth_ap(scores: Vec<f64>, positives: Vec<bool>, tau: f64, truncation: Option<usize>) -> PyResult<f64> {
    eval::smooth_ap(&scores, &positives, &eval::SmoothApConfig { tau, truncation }).map_err(py_err)
}

/// k-means++ seeded Lloyd clustering; returns (labels, centroids).
#[pyfunction]
#[pyo3(signature = (data, k, seed=0))]
fn kmeans(data: Vec<Vec<f64>>, k: usize, seed: u64) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
    let km = eval::kmeans(&data, k, seed).map_err(py_err)?;
    Ok((km.labels, km.centroids))
}

#[pymodule]
fn lidarplace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(occupied_voxels, m)?)?;
    m.add_function(wrap_pyfunction!(equalize, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_ap, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    Ok(())
}
