use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::tensor::{Coord, CoordinateSet, SparseTensor};
use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizationMode {
    Cartesian,
    /// Steps are (r meters, θ degrees, φ degrees).
    Spherical,
}

/// Per-axis voxel steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationSpec {
    pub mode: QuantizationMode,
    pub steps: [f64; 3],
    /// Treat the θ axis as periodic (full-circle sensors only).
    pub wrap_azimuth: bool,
}

impl QuantizationSpec {
    pub fn cartesian(step: f64) -> Result<Self> {
        Self::new(QuantizationMode::Cartesian, [step; 3], false)
    }

    pub fn spherical(steps: [f64; 3], wrap_azimuth: bool) -> Result<Self> {
        Self::new(QuantizationMode::Spherical, steps, wrap_azimuth)
    }

    pub fn new(mode: QuantizationMode, steps: [f64; 3], wrap_azimuth: bool) -> Result<Self> {
        if steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Parameter(format!("quantization steps must be positive, got {steps:?}")));
        }
        if wrap_azimuth && mode != QuantizationMode::Spherical {
            return Err(Error::Parameter("azimuth wrapping needs spherical quantization".into()));
        }
        Ok(Self {
            mode,
            steps,
            wrap_azimuth,
        })
    }

    fn frame(&self) -> Frame {
        match self.mode {
            QuantizationMode::Cartesian => Frame::Cartesian,
            QuantizationMode::Spherical => Frame::Spherical,
        }
    }

    /// Number of θ bins around the full circle when wrapping is on.
    pub fn azimuth_period(&self) -> Option<i32> {
        self.wrap_azimuth.then(|| (360.0 / self.steps[1]).ceil() as i32)
    }

    pub fn periods(&self) -> [Option<i32>; 3] {
        [None, self.azimuth_period(), None]
    }

    pub fn voxel_of(&self, p: [f64; 3]) -> Coord {
        let mut c = [0i32; 3];
        for a in 0..3 {
            c[a] = (p[a] / self.steps[a]).floor() as i32;
        }
        if let Some(period) = self.azimuth_period() {
            c[1] = c[1].rem_euclid(period);
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// Constant 1.0 per voxel.
    #[default]
    Ones,
    /// Mean of the member points' (already normalized) intensities.
    Intensity,
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Ones => "ones",
            FeatureMode::Intensity => "intensity",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ones" => Ok(Self::Ones),
            "intensity" => Ok(Self::Intensity),
            _ => Err(Error::Config(format!("unknown feature mode '{s}'"))),
        }
    }
}

/// Voxelizes a cloud into a one-channel sparse tensor at stride 1.
///
/// Members of a voxel are reduced in sorted order, so the tensor is bit-identical
/// under any permutation of the input points.
pub fn quantize(cloud: &PointCloud, spec: &QuantizationSpec, mode: FeatureMode) -> Result<SparseTensor> {
    cloud.require_frame(spec.frame())?;
    cloud.require_non_empty()?;
    let intensity = match mode {
        FeatureMode::Ones => None,
        FeatureMode::Intensity => Some(cloud.intensity().ok_or_else(|| {
            Error::Data(format!("cloud '{}' has no intensity channel", cloud.source_id()))
        })?),
    };
    let mut keyed: Vec<(Coord, f64)> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, &p)| (spec.voxel_of(p), intensity.map_or(1.0, |v| v[i])))
        .collect();
    keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.total_cmp(&b.1)));

    let mut coords = Vec::new();
    let mut features = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let key = keyed[start].0;
        let mut end = start;
        let mut sum = 0.0;
        while end < keyed.len() && keyed[end].0 == key {
            sum += keyed[end].1;
            end += 1;
        }
        coords.push(key);
        features.push(match mode {
            FeatureMode::Ones => 1.0,
            FeatureMode::Intensity => sum / (end - start) as f64,
        });
        start = end;
    }
    let set = CoordinateSet::from_sorted(coords, [1; 3], spec.periods());
    SparseTensor::new(Arc::new(set), features, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spherical_floor_division() {
        let spec = QuantizationSpec::spherical([0.1, 2.0, 1.875], false).unwrap();
        assert_eq!(spec.voxel_of([0.05, 10.0, 3.0]), [0, 5, 1]);
    }

    #[test]
    fn duplicates_average() {
        let cloud = PointCloud::cartesian(vec![[0.01, 0.01, 0.01], [0.02, 0.03, 0.04]], Some(vec![0.2, 0.4])).unwrap();
        let spec = QuantizationSpec::cartesian(0.1).unwrap();
        let t = quantize(&cloud, &spec, FeatureMode::Intensity).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t.features()[0] - 0.3).abs() < 1e-12);
        let t = quantize(&cloud, &spec, FeatureMode::Ones).unwrap();
        assert_eq!(t.features(), &[1.0]);
    }

    #[test]
    fn mode_errors() {
        let cloud = PointCloud::cartesian(vec![[0.0; 3]], None).unwrap();
        let sph = QuantizationSpec::spherical([0.1, 2.0, 1.875], true).unwrap();
        assert!(matches!(quantize(&cloud, &sph, FeatureMode::Ones), Err(Error::Frame { .. })));
        let cart = QuantizationSpec::cartesian(0.1).unwrap();
        assert!(matches!(quantize(&cloud, &cart, FeatureMode::Intensity), Err(Error::Data(_))));
        assert!(QuantizationSpec::cartesian(0.0).is_err());
        assert!(QuantizationSpec::new(QuantizationMode::Cartesian, [0.1; 3], true).is_err());
    }

    #[test]
    fn seam_bins_merge() {
        let spec = QuantizationSpec::spherical([1.0, 2.0, 1.875], true).unwrap();
        assert_eq!(spec.azimuth_period(), Some(180));
        assert_eq!(spec.voxel_of([1.5, 180.0, 90.0])[1], spec.voxel_of([1.5, -179.5, 90.0])[1]);
    }
}
