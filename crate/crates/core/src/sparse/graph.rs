use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{skip_concat, sparse_conv, transposed_conv_with_map, ConvWeights};
use super::kernel::{build_kernel_map, build_transposed_map, KernelMap};
use super::pool::{global_pool, Descriptor, PoolKind};
use super::quantize::{quantize, FeatureMode, QuantizationSpec};
use super::tensor::{CoordinateSet, SparseTensor};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Negative slope 0.01.
    LeakyRelu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::LeakyRelu => {
                if v >= 0.0 {
                    v
                } else {
                    0.01 * v
                }
            }
        }
    }
}

/// Per-voxel feature normalization with per-channel scale and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `x·scale + shift` (inference-mode batch norm folded into an affine map).
    Affine,
    /// Standardize each voxel across its channels, then apply the affine map.
    Layer,
}

const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv { kernel: usize, in_dim: usize, out_dim: usize, stride: i32 },
    TransposedConv { kernel: usize, in_dim: usize, out_dim: usize, stride: i32 },
    /// Concatenates the output of layer `source` after the current features.
    Skip { source: usize },
    Activation(Activation),
    Norm { kind: NormKind, channels: usize },
    GlobalPool { kind: PoolKind, normalize: bool },
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Conv { kernel, in_dim, out_dim, stride } => {
                write!(f, "conv k={kernel} in={in_dim} out={out_dim} s={stride}")
            }
            Layer::TransposedConv { kernel, in_dim, out_dim, stride } => {
                write!(f, "tconv k={kernel} in={in_dim} out={out_dim} s={stride}")
            }
            Layer::Skip { source } => write!(f, "skip from={source}"),
            Layer::Activation(Activation::Relu) => f.write_str("relu"),
            Layer::Activation(Activation::LeakyRelu) => f.write_str("leaky-relu"),
            Layer::Norm { kind, channels } => {
                let k = match kind {
                    NormKind::Affine => "affine",
                    NormKind::Layer => "layer",
                };
                write!(f, "norm {k} c={channels}")
            }
            Layer::GlobalPool { kind, normalize } => write!(f, "pool {kind} l2={normalize}"),
        }
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let head = words.next().ok_or_else(|| Error::Config("empty layer description".into()))?;
        let mut flags = Vec::new();
        let mut kv = HashMap::new();
        for w in words {
            match w.split_once('=') {
                Some((k, v)) => {
                    kv.insert(k, v);
                }
                None => flags.push(w),
            }
        }
        let bad = |what: &str| Error::Config(format!("layer '{s}': {what}"));
        let get = |key: &str| kv.get(key).copied().ok_or_else(|| bad(&format!("missing '{key}'")));
        let num = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|_| bad(&format!("bad '{key}'"))) };
        Ok(match head {
            "conv" | "tconv" => {
                let (kernel, in_dim, out_dim) = (num("k")?, num("in")?, num("out")?);
                let stride = num("s")? as i32;
                if head == "conv" {
                    Layer::Conv { kernel, in_dim, out_dim, stride }
                } else {
                    Layer::TransposedConv { kernel, in_dim, out_dim, stride }
                }
            }
            "skip" => Layer::Skip { source: num("from")? },
            "relu" => Layer::Activation(Activation::Relu),
            "leaky-relu" => Layer::Activation(Activation::LeakyRelu),
            "norm" => {
                let kind = match flags.first().copied() {
                    Some("affine") => NormKind::Affine,
                    Some("layer") => NormKind::Layer,
                    _ => return Err(bad("norm kind must be 'affine' or 'layer'")),
                };
                Layer::Norm { kind, channels: num("c")? }
            }
            "pool" => {
                let kind = match flags.first().copied() {
                    Some("mean") => PoolKind::Mean,
                    Some("max") => PoolKind::Max,
                    Some("gem") => PoolKind::Gem {
                        p: get("p")?.parse().map_err(|_| bad("bad 'p'"))?,
                    },
                    _ => return Err(bad("pool kind must be mean, max or gem")),
                };
                let normalize = match kv.get("l2").copied() {
                    None | Some("true") => true,
                    Some("false") => false,
                    Some(_) => return Err(bad("l2 must be true or false")),
                };
                Layer::GlobalPool { kind, normalize }
            }
            other => return Err(bad(&format!("unknown layer kind '{other}'"))),
        })
    }
}

/// Ordered layer list of a sparse U-Net ending in one global pooling layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGraph {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

/// Channel count and tensor stride after each layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphShape {
    pub dims: Vec<usize>,
    pub strides: Vec<i32>,
    pub output_dim: usize,
}

impl LayerGraph {
    /// Symmetric U-Net: one stride-2 encoder level per width after the first,
    /// mirrored decoder with skip concatenation, a final conv to `descriptor_dim`
    /// and GeM (p = 3) pooling with L2 normalization.
    pub fn unet(input_dim: usize, widths: &[usize], descriptor_dim: usize) -> Self {
        assert!(!widths.is_empty(), "U-Net needs at least one level");
        let mut layers = Vec::new();
        let mut skips = Vec::new();
        let mut dim = input_dim;
        for (level, &w) in widths.iter().enumerate() {
            let stride = if level == 0 { 1 } else { 2 };
            layers.push(Layer::Conv { kernel: 3, in_dim: dim, out_dim: w, stride });
            layers.push(Layer::Norm { kind: NormKind::Affine, channels: w });
            layers.push(Layer::Activation(Activation::Relu));
            skips.push(layers.len() - 1);
            dim = w;
        }
        skips.pop();
        for (&w, &source) in widths.iter().rev().skip(1).zip(skips.iter().rev()) {
            layers.push(Layer::TransposedConv { kernel: 3, in_dim: dim, out_dim: w, stride: 2 });
            layers.push(Layer::Norm { kind: NormKind::Affine, channels: w });
            layers.push(Layer::Activation(Activation::Relu));
            layers.push(Layer::Skip { source });
            let out = if source == skips[0] { descriptor_dim } else { w };
            layers.push(Layer::Conv { kernel: 3, in_dim: 2 * w, out_dim: out, stride: 1 });
            layers.push(Layer::Norm { kind: NormKind::Affine, channels: out });
            layers.push(Layer::Activation(Activation::Relu));
            dim = out;
        }
        if widths.len() == 1 {
            layers.push(Layer::Conv { kernel: 3, in_dim: dim, out_dim: descriptor_dim, stride: 1 });
            layers.push(Layer::Activation(Activation::Relu));
        }
        layers.push(Layer::GlobalPool { kind: PoolKind::Gem { p: 3.0 }, normalize: true });
        Self { input_dim, layers }
    }

    /// Default desk-scale network: widths 16/32/64, 64-dimensional descriptor.
    pub fn desk(input_dim: usize) -> Self {
        Self::unet(input_dim, &[16, 32, 64], 64)
    }

    /// Checks dimension chaining, skip ordering, U-shape strides and the single final pool.
    pub fn validate(&self) -> Result<GraphShape> {
        if self.input_dim == 0 {
            return Err(Error::Shape("input dimension must be positive".into()));
        }
        let mut dims = Vec::with_capacity(self.layers.len());
        let mut strides = Vec::with_capacity(self.layers.len());
        let mut dim = self.input_dim;
        let mut stride = 1i32;
        let mut levels = vec![1i32];
        let mut conv_strides = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let fail = |msg: String| Err(Error::Shape(msg).in_layer(i));
            match *layer {
                Layer::Conv { kernel, in_dim, out_dim, stride: s }
                | Layer::TransposedConv { kernel, in_dim, out_dim, stride: s } => {
                    if kernel == 0 || out_dim == 0 || s < 1 {
                        return fail(format!("invalid convolution parameters '{layer}'"));
                    }
                    if in_dim != dim {
                        return fail(format!("expects {in_dim} input channels, receives {dim}"));
                    }
                    dim = out_dim;
                    if matches!(layer, Layer::Conv { .. }) {
                        stride *= s;
                        if s > 1 {
                            conv_strides.push(s);
                        }
                        if !levels.contains(&stride) {
                            levels.push(stride);
                        }
                    } else {
                        if stride % s != 0 || !levels.contains(&(stride / s)) || !conv_strides.contains(&s) {
                            return fail(format!(
                                "transposed stride {s} at tensor stride {stride} has no matching encoder level"
                            ));
                        }
                        stride /= s;
                    }
                }
                Layer::Skip { source } => {
                    if source >= i {
                        return fail(format!("skip source {source} does not precede its consumer"));
                    }
                    if strides[source] != stride {
                        return fail(format!(
                            "skip from stride {} into stride {stride}",
                            strides[source]
                        ));
                    }
                    dim += dims[source];
                }
                Layer::Activation(_) => {}
                Layer::Norm { channels, .. } => {
                    if channels != dim {
                        return fail(format!("normalizes {channels} channels, receives {dim}"));
                    }
                }
                Layer::GlobalPool { kind, .. } => {
                    if i + 1 != self.layers.len() {
                        return fail("global pooling must be the last layer".into());
                    }
                    if let PoolKind::Gem { p } = kind {
                        if !(p >= 1.0 && p.is_finite()) {
                            return fail(format!("GeM power must be >= 1, got {p}"));
                        }
                    }
                }
            }
            dims.push(dim);
            strides.push(stride);
        }
        if !matches!(self.layers.last(), Some(Layer::GlobalPool { .. })) {
            return Err(Error::Shape("graph must end with a global pooling layer".into()));
        }
        Ok(GraphShape {
            dims,
            strides,
            output_dim: dim,
        })
    }

    pub fn output_dim(&self) -> Result<usize> {
        Ok(self.validate()?.output_dim)
    }
}

impl fmt::Display for LayerGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input={}", self.input_dim)?;
        for l in &self.layers {
            write!(f, "; {l}")?;
        }
        Ok(())
    }
}

impl FromStr for LayerGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';').map(str::trim).filter(|p| !p.is_empty());
        let head = parts.next().unwrap_or("");
        let input_dim = head
            .strip_prefix("input=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Config(format!("graph must start with 'input=<dim>', got '{head}'")))?;
        let layers = parts.map(str::parse).collect::<Result<_>>()?;
        Ok(Self { input_dim, layers })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Conv(ConvWeights),
    Norm { scale: Vec<f64>, shift: Vec<f64> },
}

/// Parameters for every layer that has any (`None` for parameter-free layers).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphWeights {
    pub layers: Vec<Option<LayerWeights>>,
}

impl GraphWeights {
    /// Deterministic initialization: convolution weights uniform in
    /// ±1/√(fan_in·k³) drawn at `f32` precision, zero bias, identity normalization.
    pub fn seeded(graph: &LayerGraph, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = graph
            .layers
            .iter()
            .map(|layer| match *layer {
                Layer::Conv { kernel, in_dim, out_dim, .. } | Layer::TransposedConv { kernel, in_dim, out_dim, .. } => {
                    let kvol = kernel.pow(3);
                    let bound = 1.0 / ((in_dim * kvol) as f32).sqrt();
                    let weights = (0..kvol * in_dim * out_dim)
                        .map(|_| rng.gen_range(-bound..bound) as f64)
                        .collect();
                    Some(LayerWeights::Conv(ConvWeights {
                        kernel_volume: kvol,
                        in_dim,
                        out_dim,
                        weights,
                        bias: Some(vec![0.0; out_dim]),
                    }))
                }
                Layer::Norm { channels, .. } => Some(LayerWeights::Norm {
                    scale: vec![1.0; channels],
                    shift: vec![0.0; channels],
                }),
                _ => None,
            })
            .collect();
        Self { layers }
    }

    /// Checks that every parameterized layer has weights of the declared shape.
    pub fn check(&self, graph: &LayerGraph) -> Result<()> {
        if self.layers.len() != graph.layers.len() {
            return Err(Error::Shape(format!(
                "weights cover {} layers, graph has {}",
                self.layers.len(),
                graph.layers.len()
            )));
        }
        for (i, (layer, w)) in graph.layers.iter().zip(&self.layers).enumerate() {
            let ok = match (layer, w) {
                (
                    Layer::Conv { kernel, in_dim, out_dim, .. } | Layer::TransposedConv { kernel, in_dim, out_dim, .. },
                    Some(LayerWeights::Conv(cw)),
                ) => {
                    cw.kernel_volume == kernel.pow(3)
                        && cw.in_dim == *in_dim
                        && cw.out_dim == *out_dim
                        && cw.weights.len() == cw.kernel_volume * in_dim * out_dim
                        && cw.bias.as_ref().is_none_or(|b| b.len() == *out_dim)
                }
                (Layer::Norm { channels, .. }, Some(LayerWeights::Norm { scale, shift })) => {
                    scale.len() == *channels && shift.len() == *channels
                }
                (Layer::Skip { .. } | Layer::Activation(_) | Layer::GlobalPool { .. }, None) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::Shape(format!("weights do not fit '{layer}'")).in_layer(i));
            }
        }
        Ok(())
    }
}

/// A validated graph with its weights, ready to run forward passes.
///
/// Immutable once built; concurrent forward passes only touch their own buffers.
#[derive(Debug, Clone)]
pub struct Network {
    graph: LayerGraph,
    weights: GraphWeights,
    shape: GraphShape,
}

/// Coordinates seen after one layer of a forward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub stride: [i32; 3],
    pub dim: usize,
    pub coords: Arc<CoordinateSet>,
}

type MapCache = Vec<(Arc<CoordinateSet>, usize, i32, KernelMap)>;

impl Network {
    pub fn new(graph: LayerGraph, weights: GraphWeights) -> Result<Self> {
        let shape = graph.validate()?;
        weights.check(&graph)?;
        Ok(Self { graph, weights, shape })
    }

    pub fn seeded(graph: LayerGraph, seed: u64) -> Result<Self> {
        let weights = GraphWeights::seeded(&graph, seed);
        Self::new(graph, weights)
    }

    pub fn graph(&self) -> &LayerGraph {
        &self.graph
    }

    pub fn weights(&self) -> &GraphWeights {
        &self.weights
    }

    pub fn output_dim(&self) -> usize {
        self.shape.output_dim
    }

    /// Quantize → run all layers → descriptor.
    pub fn describe(&self, cloud: &PointCloud, spec: &QuantizationSpec, mode: FeatureMode) -> Result<Descriptor> {
        let tensor = quantize(cloud, spec, mode)?;
        self.forward(&tensor)
    }

    pub fn forward(&self, input: &SparseTensor) -> Result<Descriptor> {
        self.run(input, None)
    }

    /// Like [`Network::forward`], also returning per-layer coordinate sets.
    pub fn forward_traced(&self, input: &SparseTensor) -> Result<(Descriptor, Vec<LayerTrace>)> {
        let mut trace = Vec::with_capacity(self.graph.layers.len());
        let d = self.run(input, Some(&mut trace))?;
        Ok((d, trace))
    }

    fn run(&self, input: &SparseTensor, mut trace: Option<&mut Vec<LayerTrace>>) -> Result<Descriptor> {
        if input.is_empty() {
            return Err(Error::Empty("sparse tensor"));
        }
        if input.dim() != self.graph.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} input channels, tensor has {}",
                self.graph.input_dim,
                input.dim()
            )));
        }
        let n = self.graph.layers.len();
        let mut keep = vec![false; n];
        for l in &self.graph.layers {
            if let Layer::Skip { source } = l {
                keep[*source] = true;
            }
        }
        let mut saved: Vec<Option<SparseTensor>> = vec![None; n];
        let mut levels: HashMap<[i32; 3], Arc<CoordinateSet>> = HashMap::new();
        levels.insert(input.stride(), input.coordinate_set().clone());
        let mut cache: MapCache = Vec::new();
        let mut cur = input.clone();

        for (i, layer) in self.graph.layers.iter().enumerate() {
            if let Layer::GlobalPool { kind, normalize } = layer {
                return global_pool(&cur, *kind, *normalize).map_err(|e| e.in_layer(i));
            }
            self.apply(i, &mut cur, &saved, &mut levels, &mut cache)
                .map_err(|e| e.in_layer(i))?;
            if keep[i] {
                saved[i] = Some(cur.clone());
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(LayerTrace {
                    stride: cur.stride(),
                    dim: cur.dim(),
                    coords: cur.coordinate_set().clone(),
                });
            }
        }
        unreachable!("validated graphs end with a pooling layer")
    }

    fn apply(
        &self,
        i: usize,
        cur: &mut SparseTensor,
        saved: &[Option<SparseTensor>],
        levels: &mut HashMap<[i32; 3], Arc<CoordinateSet>>,
        cache: &mut MapCache,
    ) -> Result<()> {
        match &self.graph.layers[i] {
            Layer::Conv { kernel, stride, .. } => {
                let map = cached_map(cache, cur.coordinate_set(), *kernel, *stride)?;
                let out = sparse_conv(cur, self.conv_weights(i), map)?;
                levels
                    .entry(out.stride())
                    .or_insert_with(|| out.coordinate_set().clone());
                *cur = out;
            }
            Layer::TransposedConv { kernel, stride, .. } => {
                let fine = cur.stride().map(|s| s / stride);
                let target = levels
                    .get(&fine)
                    .ok_or_else(|| Error::Shape(format!("no encoder coordinates at stride {fine:?}")))?;
                let map = build_transposed_map(cur.coordinate_set(), target, *kernel, *stride)?;
                *cur = transposed_conv_with_map(cur, self.conv_weights(i), target, &map)?;
            }
            Layer::Skip { source } => {
                let enc = saved[*source].as_ref().expect("skip sources are retained");
                *cur = skip_concat(cur, enc)?;
            }
            Layer::Activation(act) => {
                cur.features_mut().iter_mut().for_each(|v| *v = act.apply(*v));
            }
            Layer::Norm { kind, .. } => {
                let Some(LayerWeights::Norm { scale, shift }) = &self.weights.layers[i] else {
                    unreachable!("weights checked at construction")
                };
                normalize(cur, *kind, scale, shift);
            }
            Layer::GlobalPool { .. } => {}
        }
        Ok(())
    }

    fn conv_weights(&self, i: usize) -> &ConvWeights {
        match &self.weights.layers[i] {
            Some(LayerWeights::Conv(w)) => w,
            _ => unreachable!("weights checked at construction"),
        }
    }
}

fn cached_map<'a>(cache: &'a mut MapCache, set: &Arc<CoordinateSet>, kernel: usize, stride: i32) -> Result<&'a KernelMap> {
    let pos = cache
        .iter()
        .position(|(s, k, st, _)| Arc::ptr_eq(s, set) && *k == kernel && *st == stride);
    let pos = match pos {
        Some(p) => p,
        None => {
            let map = build_kernel_map(set, kernel, stride)?;
            cache.push((set.clone(), kernel, stride, map));
            cache.len() - 1
        }
    };
    Ok(&cache[pos].3)
}

fn normalize(t: &mut SparseTensor, kind: NormKind, scale: &[f64], shift: &[f64]) {
    let dim = t.dim();
    for row in t.features_mut().chunks_exact_mut(dim) {
        if kind == NormKind::Layer {
            let mean = row.iter().sum::<f64>() / dim as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
        }
        for ((v, a), b) in row.iter_mut().zip(scale).zip(shift) {
            *v = *v * a + b;
        }
    }
}
