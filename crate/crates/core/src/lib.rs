//! LiDAR place recognition toolkit.
//!
//! The crate covers the whole descriptor pipeline for a single scan:
//!
//! * [`ingest`]: binary/CSV readers, pose tables, range filtering and voxel downsampling;
//! * [`geometry`]: Cartesian/spherical conversion with sensor field-of-view presets;
//! * [`intensity`]: per-scan histogram equalization and min-max scaling;
//! * [`sparse`]: quantization into sparse tensors and a generalized sparse-convolution
//!   U-Net executor that produces a global descriptor;
//! * [`eval`]: recall@N evaluation, Smooth-AP and k-means clustering of descriptors;
//! * [`cli`]: config-driven orchestration used by the `lidarplace` binary.

pub mod cli;
pub mod cloud;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod ingest;
pub mod intensity;
pub mod sparse;
pub mod svg;

pub use cloud::{Frame, PointCloud, Pose};
pub use error::{Error, Result};
