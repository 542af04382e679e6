//! Readers for on-disk clouds and poses, plus the geometric pre-filters applied
//! before any coordinate transform.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::cloud::{Convention, Frame, PointCloud, Pose};
use crate::error::{Error, Result};

const XYZI_RECORD: usize = 16;

/// Reads consecutive little-endian `f32` quadruplets (x, y, z, intensity).
pub fn load_xyzi_binary(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = source_id_from_path(path);
    decode_xyzi(&bytes, &id)
}

pub fn decode_xyzi(bytes: &[u8], source_id: &str) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(XYZI_RECORD) {
        return Err(Error::Format(format!(
            "xyzi payload of {} bytes is not a multiple of {XYZI_RECORD}",
            bytes.len()
        )));
    }
    if bytes.is_empty() {
        return Err(Error::EmptyCloud(Some(source_id.to_string())));
    }
    let n = bytes.len() / XYZI_RECORD;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for (idx, rec) in bytes.chunks_exact(XYZI_RECORD).enumerate() {
        let mut v = [0f32; 4];
        for (slot, word) in v.iter_mut().zip(rec.chunks_exact(4)) {
            *slot = f32::from_le_bytes([word[0], word[1], word[2], word[3]]);
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data(format!("non-finite value in point {idx}")));
        }
        points.push([v[0] as f64, v[1] as f64, v[2] as f64]);
        intensity.push(v[3] as f64);
    }
    let convention = detect_convention(&points);
    Ok(PointCloud::new(points, Some(intensity), Frame::Cartesian, source_id)?.with_convention(convention))
}

/// Serializes a Cartesian cloud back into xyzi records; missing intensity is written as 0.
pub fn encode_xyzi(cloud: &PointCloud) -> Result<Vec<u8>> {
    cloud.require_frame(Frame::Cartesian)?;
    let mut out = Vec::with_capacity(cloud.len() * XYZI_RECORD);
    for (i, p) in cloud.points().iter().enumerate() {
        let inten = cloud.intensity().map_or(0.0, |v| v[i]);
        for c in [p[0], p[1], p[2], inten] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_xyzi_binary(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_xyzi(cloud)?).map_err(|e| Error::io(path, e))
}

/// Column names used by [`load_csv_cloud`].
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub x: String,
    pub y: String,
    pub z: String,
    /// Read when present in the header, otherwise the cloud has no intensity.
    pub intensity: Option<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            x: "x".into(),
            y: "y".into(),
            z: "z".into(),
            intensity: Some("intensity".into()),
        }
    }
}

pub fn load_csv_cloud(path: impl AsRef<Path>, columns: &ColumnSpec) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut required = [0usize; 3];
    for (slot, name) in required.iter_mut().zip([&columns.x, &columns.y, &columns.z]) {
        *slot = find(name)
            .ok_or_else(|| Error::Format(format!("{}: missing column '{name}'", path.display())))?;
    }
    let intensity_col = columns.intensity.as_deref().and_then(find);

    let mut points = Vec::new();
    let mut intensity = intensity_col.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Data(format!(
                    "{} line {line}: cannot use value '{raw}'",
                    path.display()
                ))),
            }
        };
        points.push([field(required[0])?, field(required[1])?, field(required[2])?]);
        if let (Some(col), Some(values)) = (intensity_col, intensity.as_mut()) {
            values.push(field(col)?);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud(Some(source_id_from_path(path))));
    }
    let convention = detect_convention(&points);
    Ok(PointCloud::new(points, intensity, Frame::Cartesian, source_id_from_path(path))?
        .with_convention(convention))
}

/// Reads a pose table with columns `source_id,timestamp,x,y[,z]`.
pub fn load_poses(path: impl AsRef<Path>) -> Result<Vec<Pose>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = |name: &str| {
        find(name).ok_or_else(|| Error::Format(format!("{}: missing column '{name}'", path.display())))
    };
    let (id_col, t_col, x_col, y_col) = (col("source_id")?, col("timestamp")?, col("x")?, col("y")?);
    let z_col = find("z");

    let mut poses = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::Data(format!("{} line {line}: cannot parse '{raw}'", path.display()))
            })
        };
        let z = match z_col {
            Some(c) if !record.get(c).unwrap_or("").is_empty() => Some(num(c)?),
            _ => None,
        };
        let id = record.get(id_col).unwrap_or("").to_string();
        poses.push(
            Pose::new(id, num(t_col)?, num(x_col)?, num(y_col)?, z)
                .map_err(|e| Error::Data(format!("{} line {line}: {e}", path.display())))?,
        );
    }
    Ok(poses)
}

pub fn write_poses(path: impl AsRef<Path>, poses: &[Pose]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let with_z = poses.iter().any(|p| p.z.is_some());
    let mut header = vec!["source_id", "timestamp", "x", "y"];
    if with_z {
        header.push("z");
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for p in poses {
        let mut row = vec![p.source_id.clone(), p.timestamp.to_string(), p.x.to_string(), p.y.to_string()];
        if with_z {
            row.push(p.z.map(|z| z.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Keeps the points with `r_min <= |p| <= r_max`, preserving order.
pub fn range_filter(cloud: &PointCloud, r_min: f64, r_max: f64) -> Result<PointCloud> {
    cloud.require_frame(Frame::Cartesian)?;
    if !(r_min >= 0.0 && r_min < r_max) {
        return Err(Error::Parameter(format!(
            "range bounds must satisfy 0 <= r_min < r_max, got ({r_min}, {r_max})"
        )));
    }
    let pts = cloud.points();
    let out = cloud.retain_indices(|i| {
        let [x, y, z] = pts[i];
        let r = (x * x + y * y + z * z).sqrt();
        r >= r_min && r <= r_max
    });
    out.require_non_empty()?;
    Ok(out)
}

/// Replaces the points of every occupied voxel by their centroid (and mean intensity).
///
/// Output is ordered by voxel index; members are reduced in sorted order so the
/// result does not depend on input point order.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    cloud.require_frame(Frame::Cartesian)?;
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::Parameter(format!("voxel size must be positive, got {voxel_size}")));
    }
    cloud.require_non_empty()?;
    let pts = cloud.points();
    let inten = cloud.intensity();
    let key = |p: &[f64; 3]| p.map(|c| (c / voxel_size).floor() as i64);

    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        key(&pts[a])
            .cmp(&key(&pts[b]))
            .then_with(|| cmp_point(&pts[a], &pts[b]))
            .then_with(|| match inten {
                Some(v) => v[a].total_cmp(&v[b]),
                None => Ordering::Equal,
            })
    });

    let mut points = Vec::new();
    let mut intensity = inten.map(|_| Vec::new());
    let mut start = 0;
    while start < order.len() {
        let k = key(&pts[order[start]]);
        let mut end = start + 1;
        while end < order.len() && key(&pts[order[end]]) == k {
            end += 1;
        }
        let members = &order[start..end];
        let n = members.len() as f64;
        let mut sum = [0.0; 3];
        for &m in members {
            for a in 0..3 {
                sum[a] += pts[m][a];
            }
        }
        points.push(sum.map(|s| s / n));
        if let (Some(src), Some(dst)) = (inten, intensity.as_mut()) {
            dst.push(members.iter().map(|&m| src[m]).sum::<f64>() / n);
        }
        start = end;
    }
    Ok(PointCloud::from_parts_unchecked(points, intensity, Frame::Cartesian, cloud))
}

/// Number of distinct voxels occupied by `points` at `voxel_size`.
pub fn occupied_voxels(points: &[[f64; 3]], voxel_size: f64) -> usize {
    let mut seen = HashMap::new();
    for p in points {
        seen.insert(p.map(|c| (c / voxel_size).floor() as i64), ());
    }
    seen.len()
}

fn cmp_point(a: &[f64; 3], b: &[f64; 3]) -> Ordering {
    a[0].total_cmp(&b[0])
        .then_with(|| a[1].total_cmp(&b[1]))
        .then_with(|| a[2].total_cmp(&b[2]))
}

fn detect_convention(points: &[[f64; 3]]) -> Convention {
    if points.iter().all(|p| p.iter().all(|c| c.abs() <= 1.0)) {
        Convention::UnitCube
    } else {
        Convention::Metric
    }
}

pub(crate) fn source_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!(
            "{}{}: {other:?}",
            path.display(),
            line.map(|l| format!(" line {l}")).unwrap_or_default()
        )),
    }
}
