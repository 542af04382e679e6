use std::fmt;

use crate::error::{Error, Result};

/// Coordinate frame of a [`PointCloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// (x, y, z) in meters.
    Cartesian,
    /// (r meters, θ degrees, φ degrees) with θ ∈ (−180, 180] and φ ∈ [0, 180].
    Spherical,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Cartesian => "cartesian",
            Frame::Spherical => "spherical",
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scale convention of Cartesian coordinates as found on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// Metric coordinates straight from the sensor.
    #[default]
    Metric,
    /// Submaps already rescaled into the [-1, 1] cube.
    UnitCube,
}

/// An ordered list of points with optional per-point intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
    intensity: Option<Vec<f64>>,
    frame: Frame,
    source_id: String,
    convention: Convention,
}

impl PointCloud {
    /// Builds a cloud after checking the length, finiteness and frame-range invariants.
    pub fn new(
        points: Vec<[f64; 3]>,
        intensity: Option<Vec<f64>>,
        frame: Frame,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if let Some(i) = &intensity {
            if i.len() != points.len() {
                return Err(Error::Data(format!(
                    "intensity has {} entries for {} points",
                    i.len(),
                    points.len()
                )));
            }
            if let Some(bad) = i.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite intensity at index {bad}")));
            }
        }
        if let Some(bad) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::Data(format!("non-finite coordinate at index {bad}")));
        }
        if frame == Frame::Spherical {
            for (idx, &[r, theta, phi]) in points.iter().enumerate() {
                let ok = r >= 0.0
                    && theta > -180.0
                    && theta <= 180.0
                    && (0.0..=180.0).contains(&phi);
                if !ok {
                    return Err(Error::Data(format!(
                        "spherical point {idx} out of range: ({r}, {theta}, {phi})"
                    )));
                }
            }
        }
        Ok(Self {
            points,
            intensity,
            frame,
            source_id: source_id.into(),
            convention: Convention::Metric,
        })
    }

    pub fn cartesian(points: Vec<[f64; 3]>, intensity: Option<Vec<f64>>) -> Result<Self> {
        Self::new(points, intensity, Frame::Cartesian, "")
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    /// Replaces the intensity channel; the new list must match the point count.
    pub fn with_intensity(self, intensity: Option<Vec<f64>>) -> Result<Self> {
        let convention = self.convention;
        Ok(Self::new(self.points, intensity, self.frame, self.source_id)?.with_convention(convention))
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn intensity(&self) -> Option<&[f64]> {
        self.intensity.as_deref()
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_parts(self) -> (Vec<[f64; 3]>, Option<Vec<f64>>) {
        (self.points, self.intensity)
    }

    pub(crate) fn require_frame(&self, expected: Frame) -> Result<()> {
        if self.frame == expected {
            Ok(())
        } else {
            Err(Error::Frame {
                expected: expected.name(),
                actual: self.frame.name(),
            })
        }
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud(
                (!self.source_id.is_empty()).then(|| self.source_id.clone()),
            ))
        } else {
            Ok(())
        }
    }

    /// Keeps the points whose index satisfies `keep`, carrying intensity along.
    pub(crate) fn retain_indices(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.points.len()).filter(|&i| keep(i)).collect();
        Self {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|v| idx.iter().map(|&i| v[i]).collect()),
            frame: self.frame,
            source_id: self.source_id.clone(),
            convention: self.convention,
        }
    }

    pub(crate) fn from_parts_unchecked(
        points: Vec<[f64; 3]>,
        intensity: Option<Vec<f64>>,
        frame: Frame,
        like: &PointCloud,
    ) -> Self {
        Self {
            points,
            intensity,
            frame,
            source_id: like.source_id.clone(),
            convention: like.convention,
        }
    }
}

/// Ground-truth position of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub source_id: String,
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub z: Option<f64>,
}

impl Pose {
    pub fn new(source_id: impl Into<String>, timestamp: f64, x: f64, y: f64, z: Option<f64>) -> Result<Self> {
        let source_id = source_id.into();
        if !(x.is_finite() && y.is_finite() && z.is_none_or(f64::is_finite)) {
            return Err(Error::Data(format!("non-finite position for pose {source_id}")));
        }
        Ok(Self {
            source_id,
            timestamp,
            x,
            y,
            z,
        })
    }

    /// Planar distance used for positive matching.
    pub fn planar_distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}
