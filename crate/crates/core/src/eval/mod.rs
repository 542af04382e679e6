//! Place-recognition evaluation: test-area splits, recall@N, Smooth-AP and
//! k-means clustering of descriptors.

mod areas;
mod descriptor_set;
mod kmeans;
mod recall;
mod smooth_ap;

pub use areas::{split_by_areas, TestArea};
pub use descriptor_set::{DescriptorEntry, DescriptorSet, Role};
pub use kmeans::{kmeans, kmeans_from, kmeans_plus_plus, KMeans, MAX_ITERATIONS, TOLERANCE};
pub use recall::{recall_at, squared_distance, EvalProtocol, RecallDepth, RecallResult};
pub use smooth_ap::{smooth_ap, SmoothApConfig};
