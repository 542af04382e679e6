//! Sparse voxel tensors and a generalized sparse-convolution U-Net executor.
//!
//! A cloud is quantized into a [`SparseTensor`] (unique integer voxel
//! coordinates plus one feature row each). Convolutions are evaluated only at
//! occupied output sites by gathering through a [`KernelMap`]; the decoder
//! restores encoder coordinate sets exactly so skip connections can
//! concatenate features row by row.

mod conv;
mod graph;
mod kernel;
mod pool;
mod quantize;
mod tensor;
pub mod weights_io;

pub use conv::{skip_concat, sparse_conv, transposed_sparse_conv, ConvWeights};
pub use graph::{
    Activation, GraphShape, GraphWeights, Layer, LayerGraph, LayerTrace, LayerWeights, Network, NormKind,
};
pub use kernel::{build_kernel_map, build_transposed_map, kernel_offsets, KernelMap};
pub use pool::{global_pool, Descriptor, PoolKind};
pub use quantize::{quantize, FeatureMode, QuantizationMode, QuantizationSpec};
pub use tensor::{Coord, CoordinateSet, SparseTensor};
