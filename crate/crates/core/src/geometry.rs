//! Cartesian ⇄ spherical conversion. Angles are kept in degrees throughout so
//! that degree-valued quantization steps apply directly.

use std::str::FromStr;

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};

/// Angular coverage of a LiDAR sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFov {
    /// Horizontal (min, max) in degrees.
    pub horizontal: (f64, f64),
    /// Vertical (min, max) in degrees.
    pub vertical: (f64, f64),
    pub channels: u32,
    /// Rotation subtracted from the raw azimuth before wrapping into (−180, 180].
    /// Lets a partial-FoV sensor mounted off-axis be centered on the canonical interval.
    pub azimuth_offset_deg: f64,
}

impl SensorFov {
    pub fn new(horizontal: (f64, f64), vertical: (f64, f64), channels: u32) -> Result<Self> {
        let fov = Self {
            horizontal,
            vertical,
            channels,
            azimuth_offset_deg: 0.0,
        };
        fov.validate()?;
        Ok(fov)
    }

    pub fn with_azimuth_offset(mut self, deg: f64) -> Self {
        self.azimuth_offset_deg = deg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (h0, h1) = self.horizontal;
        let (v0, v1) = self.vertical;
        if !(h0 < h1 && h1 - h0 <= 360.0) {
            return Err(Error::Parameter(format!("invalid horizontal FoV ({h0}, {h1})")));
        }
        if !(v0 < v1 && v1 - v0 <= 180.0) {
            return Err(Error::Parameter(format!("invalid vertical FoV ({v0}, {v1})")));
        }
        if self.channels == 0 {
            return Err(Error::Parameter("sensor needs at least one channel".into()));
        }
        if !self.azimuth_offset_deg.is_finite() {
            return Err(Error::Parameter("azimuth offset must be finite".into()));
        }
        Ok(())
    }

    pub fn is_full_circle(&self) -> bool {
        self.horizontal.1 - self.horizontal.0 >= 360.0 - 1e-9
    }

    /// Whether an azimuth (already wrapped) lies inside the horizontal FoV.
    pub fn contains_azimuth(&self, theta: f64) -> bool {
        self.is_full_circle() || (theta >= self.horizontal.0 && theta <= self.horizontal.1)
    }

    /// Full-circle 360° sensor with the given vertical range.
    fn spinning(vertical: (f64, f64), channels: u32) -> Self {
        Self {
            horizontal: (-180.0, 180.0),
            vertical,
            channels,
            azimuth_offset_deg: 0.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        SensorPreset::from_str(name).ok().map(SensorPreset::fov)
    }
}

/// Sensors used by the supported datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorPreset {
    SickLms151,
    Vlp16,
    Hdl64e,
    Hdl32e,
    Os1_128,
}

impl SensorPreset {
    pub const ALL: [SensorPreset; 5] = [
        SensorPreset::SickLms151,
        SensorPreset::Vlp16,
        SensorPreset::Hdl64e,
        SensorPreset::Hdl32e,
        SensorPreset::Os1_128,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SensorPreset::SickLms151 => "sick-lms151",
            SensorPreset::Vlp16 => "vlp16",
            SensorPreset::Hdl64e => "hdl64e",
            SensorPreset::Hdl32e => "hdl32e",
            SensorPreset::Os1_128 => "os1-128",
        }
    }

    pub fn fov(self) -> SensorFov {
        match self {
            // 2D scanner: 270° sweep, vertical extent as listed for the sensor.
            SensorPreset::SickLms151 => SensorFov {
                horizontal: (-135.0, 135.0),
                vertical: (0.25, 0.5),
                channels: 1,
                azimuth_offset_deg: 0.0,
            },
            SensorPreset::Vlp16 => SensorFov::spinning((-15.0, 15.0), 16),
            SensorPreset::Hdl64e => SensorFov::spinning((-24.8, 2.0), 64),
            SensorPreset::Hdl32e => SensorFov::spinning((-30.67, 10.67), 32),
            SensorPreset::Os1_128 => SensorFov::spinning((-22.5, 22.5), 128),
        }
    }
}

impl FromStr for SensorPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sensor preset '{s}'")))
    }
}

/// Wraps an angle in degrees into (−180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// (x, y, z) → (r, θ, φ) for one point; the origin maps to (0, 0, 0).
pub fn point_to_spherical(p: [f64; 3], fov: &SensorFov) -> [f64; 3] {
    let [x, y, z] = p;
    let r = (x * x + y * y + z * z).sqrt();
    if r == 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let mut theta = wrap_degrees(y.atan2(x).to_degrees() - fov.azimuth_offset_deg);
    if theta <= -180.0 {
        theta = 180.0;
    }
    let phi = (z / r).clamp(-1.0, 1.0).acos().to_degrees();
    [r, theta, phi]
}

pub fn point_from_spherical(p: [f64; 3]) -> [f64; 3] {
    let [r, theta, phi] = p;
    let (st, ct) = theta.to_radians().sin_cos();
    let (sp, cp) = phi.to_radians().sin_cos();
    [r * sp * ct, r * sp * st, r * cp]
}

/// Converts a Cartesian cloud into (r, θ, φ); intensity is carried unchanged.
pub fn to_spherical(cloud: &PointCloud, fov: &SensorFov) -> Result<PointCloud> {
    cloud.require_frame(Frame::Cartesian)?;
    let points = cloud
        .points()
        .iter()
        .map(|&p| point_to_spherical(p, fov))
        .collect();
    Ok(PointCloud::from_parts_unchecked(
        points,
        cloud.intensity().map(<[f64]>::to_vec),
        Frame::Spherical,
        cloud,
    ))
}

pub fn from_spherical(cloud: &PointCloud) -> Result<PointCloud> {
    cloud.require_frame(Frame::Spherical)?;
    let points = cloud.points().iter().map(|&p| point_from_spherical(p)).collect();
    Ok(PointCloud::from_parts_unchecked(
        points,
        cloud.intensity().map(<[f64]>::to_vec),
        Frame::Cartesian,
        cloud,
    ))
}
