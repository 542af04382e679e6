use std::sync::Arc;

use rayon::prelude::*;

use super::kernel::{build_transposed_map, KernelMap};
use super::tensor::{CoordinateSet, SparseTensor};
use crate::error::{Error, Result};

/// One weight matrix (`out_dim × in_dim`, row-major) per kernel offset plus optional bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub kernel_volume: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl ConvWeights {
    pub fn new(kernel_volume: usize, in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if weights.len() != kernel_volume * in_dim * out_dim {
            return Err(Error::Shape(format!(
                "{} weights for {kernel_volume} offsets of {out_dim}x{in_dim}",
                weights.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != out_dim {
                return Err(Error::Shape(format!("bias of length {} for {out_dim} outputs", b.len())));
            }
        }
        Ok(Self {
            kernel_volume,
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn zeros(kernel_volume: usize, in_dim: usize, out_dim: usize) -> Self {
        Self {
            kernel_volume,
            in_dim,
            out_dim,
            weights: vec![0.0; kernel_volume * in_dim * out_dim],
            bias: None,
        }
    }

    pub fn matrix(&self, offset: usize) -> &[f64] {
        let n = self.in_dim * self.out_dim;
        &self.weights[offset * n..(offset + 1) * n]
    }

    pub fn matrix_mut(&mut self, offset: usize) -> &mut [f64] {
        let n = self.in_dim * self.out_dim;
        &mut self.weights[offset * n..(offset + 1) * n]
    }

    /// Per-offset transposes without bias: the weights whose transposed
    /// convolution is the adjoint of this convolution.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.kernel_volume, self.out_dim, self.in_dim);
        for o in 0..self.kernel_volume {
            let src = self.matrix(o);
            let dst = out.matrix_mut(o);
            for r in 0..self.out_dim {
                for c in 0..self.in_dim {
                    dst[c * self.out_dim + r] = src[r * self.in_dim + c];
                }
            }
        }
        out
    }
}

fn check_weights(weights: &ConvWeights, map: &KernelMap, in_dim: usize) -> Result<()> {
    if weights.kernel_volume != map.offsets.len() {
        return Err(Error::Shape(format!(
            "{} weight matrices for a kernel with {} offsets",
            weights.kernel_volume,
            map.offsets.len()
        )));
    }
    if weights.in_dim != in_dim {
        return Err(Error::Shape(format!(
            "weights expect {} input channels, tensor has {in_dim}",
            weights.in_dim
        )));
    }
    Ok(())
}

/// Accumulates `W_o · src[from]` into `dst[to]` for every pair of every offset.
///
/// Output rows are filled in parallel; each row sums its contributions in
/// (offset, pair) order, so the result does not depend on the thread count.
fn accumulate(
    weights: &ConvWeights,
    map: &KernelMap,
    src: &[f64],
    dst: &mut [f64],
    route: impl Fn((usize, usize)) -> (usize, usize),
) {
    let (id, od) = (weights.in_dim, weights.out_dim);
    let rows = dst.len() / od.max(1);
    let mut start = vec![0usize; rows + 1];
    for pairs in &map.pairs {
        for &pair in pairs {
            start[route(pair).1 + 1] += 1;
        }
    }
    for i in 0..rows {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut sources = vec![(0usize, 0usize); start[rows]];
    for (o, pairs) in map.pairs.iter().enumerate() {
        for &pair in pairs {
            let (from, to) = route(pair);
            sources[fill[to]] = (o, from);
            fill[to] += 1;
        }
    }
    // input-major copy of every matrix: column b of W_o is contiguous, so each
    // contribution is a run of axpy updates over the output channels
    let mut columns = vec![0.0; weights.weights.len()];
    for o in 0..weights.kernel_volume {
        let w = weights.matrix(o);
        let t = &mut columns[o * id * od..(o + 1) * id * od];
        for r in 0..od {
            for b in 0..id {
                t[b * od + r] = w[r * id + b];
            }
        }
    }
    dst.par_chunks_mut(od.max(1)).enumerate().for_each(|(to, y)| {
        for &(o, from) in &sources[start[to]..start[to + 1]] {
            let x = &src[from * id..(from + 1) * id];
            let t = &columns[o * id * od..(o + 1) * id * od];
            for (b, &xb) in x.iter().enumerate() {
                for (yr, &c) in y.iter_mut().zip(&t[b * od..(b + 1) * od]) {
                    *yr += c * xb;
                }
            }
        }
    });
}

fn init_output(rows: usize, weights: &ConvWeights) -> Vec<f64> {
    match &weights.bias {
        Some(b) => (0..rows).flat_map(|_| b.iter().copied()).collect(),
        None => vec![0.0; rows * weights.out_dim],
    }
}

/// Generalized sparse convolution evaluated at the map's output coordinates.
pub fn sparse_conv(input: &SparseTensor, weights: &ConvWeights, map: &KernelMap) -> Result<SparseTensor> {
    check_weights(weights, map, input.dim())?;
    if map.fine != **input.coordinate_set() {
        return Err(Error::Shape("kernel map was built for a different coordinate set".into()));
    }
    let coarse = if map.stride == 1 {
        input.coordinate_set().clone()
    } else {
        Arc::new(map.coarse.clone())
    };
    let mut out = init_output(coarse.len(), weights);
    accumulate(weights, map, input.features(), &mut out, |p| p);
    Ok(SparseTensor::from_parts_unchecked(coarse, out, weights.out_dim))
}

/// Transposed convolution: scatters coarse features back onto `target`.
///
/// Output rows follow `target` order, and its coordinate set is shared with `target`.
pub fn transposed_sparse_conv(
    input: &SparseTensor,
    weights: &ConvWeights,
    target: &Arc<CoordinateSet>,
    kernel_size: usize,
    stride: i32,
) -> Result<SparseTensor> {
    let map = build_transposed_map(input.coordinate_set(), target, kernel_size, stride)?;
    transposed_conv_with_map(input, weights, target, &map)
}

pub(crate) fn transposed_conv_with_map(
    input: &SparseTensor,
    weights: &ConvWeights,
    target: &Arc<CoordinateSet>,
    map: &KernelMap,
) -> Result<SparseTensor> {
    check_weights(weights, map, input.dim())?;
    let mut out = init_output(target.len(), weights);
    accumulate(weights, map, input.features(), &mut out, |(fine, coarse)| (coarse, fine));
    Ok(SparseTensor::from_parts_unchecked(target.clone(), out, weights.out_dim))
}

/// Per-coordinate concatenation `[decoder | encoder]` in decoder row order.
pub fn skip_concat(decoder: &SparseTensor, encoder: &SparseTensor) -> Result<SparseTensor> {
    let (dset, eset) = (decoder.coordinate_set(), encoder.coordinate_set());
    if dset.stride() != eset.stride() {
        return Err(Error::Shape(format!(
            "skip connection between strides {:?} and {:?}",
            dset.stride(),
            eset.stride()
        )));
    }
    let same = Arc::ptr_eq(dset, eset);
    if !same {
        if let Some(w) = dset.witness_difference(eset) {
            return Err(Error::Coordinate {
                message: "skip connection coordinate sets differ".into(),
                witness: w,
            });
        }
    }
    let (dd, ed) = (decoder.dim(), encoder.dim());
    let mut out = Vec::with_capacity(decoder.len() * (dd + ed));
    for (i, &c) in decoder.coords().iter().enumerate() {
        let j = if same { i } else { eset.row_of(c).expect("sets are equal") };
        out.extend_from_slice(decoder.row(i));
        out.extend_from_slice(encoder.row(j));
    }
    Ok(SparseTensor::from_parts_unchecked(dset.clone(), out, dd + ed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::kernel::{build_kernel_map, kernel_offsets};

    fn tensor(rows: Vec<([i32; 3], Vec<f64>)>) -> SparseTensor {
        SparseTensor::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let t = tensor(vec![([0, 0, 0], vec![1.0, 2.0]), ([1, 0, 0], vec![3.0, -4.0]), ([5, 5, 5], vec![0.5, 0.0])]);
        let mut w = ConvWeights::zeros(27, 2, 2);
        let center = kernel_offsets(3).iter().position(|o| *o == [0, 0, 0]).unwrap();
        w.matrix_mut(center).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let map = build_kernel_map(t.coordinate_set(), 3, 1).unwrap();
        let out = sparse_conv(&t, &w, &map).unwrap();
        assert_eq!(out.features(), t.features());
        assert_eq!(out.coords(), t.coords());
    }

    #[test]
    fn isolated_voxel_sees_only_center() {
        let t = tensor(vec![([2, 2, 2], vec![3.0])]);
        let w = ConvWeights::new(27, 1, 1, vec![1.0; 27], None).unwrap();
        let map = build_kernel_map(t.coordinate_set(), 3, 1).unwrap();
        assert_eq!(sparse_conv(&t, &w, &map).unwrap().features(), &[3.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let t = tensor(vec![([0, 0, 0], vec![1.0, 2.0])]);
        let w = ConvWeights::zeros(27, 3, 1);
        let map = build_kernel_map(t.coordinate_set(), 3, 1).unwrap();
        assert!(matches!(sparse_conv(&t, &w, &map), Err(Error::Shape(_))));
        let w = ConvWeights::zeros(8, 2, 1);
        assert!(matches!(sparse_conv(&t, &w, &map), Err(Error::Shape(_))));
    }

    #[test]
    fn coarse_voxel_fans_out_to_at_most_eight() {
        let fine = Arc::new(
            CoordinateSet::new(
                vec![[0, 0, 0], [1, 0, 0], [0, 1, 1], [1, 1, 1], [2, 0, 0]],
                [1; 3],
                [None; 3],
            )
            .unwrap(),
        );
        let coarse = Arc::new(CoordinateSet::new(vec![[0, 0, 0]], [2; 3], [None; 3]).unwrap());
        let input = SparseTensor::new(coarse, vec![1.0], 1).unwrap();
        let w = ConvWeights::new(8, 1, 1, vec![1.0; 8], None).unwrap();
        let out = transposed_sparse_conv(&input, &w, &fine, 2, 2);
        // [2,0,0] floors to coarse [2,0,0] which the input lacks: allowed, it just receives nothing.
        let out = out.unwrap();
        let hit = out.features().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(hit, 4);
        assert!(hit <= 8);
        assert_eq!(out.feature_at([2, 0, 0]), Some(&[0.0][..]));
    }

    #[test]
    fn skip_shapes_and_errors() {
        let a = tensor((0..5).map(|i| ([i, 0, 0], vec![i as f64])).collect());
        let b = tensor((0..5).rev().map(|i| ([i, 0, 0], vec![10.0, 20.0 + i as f64])).collect());
        let out = skip_concat(&a, &b).unwrap();
        assert_eq!(out.dim(), 3);
        assert_eq!(out.len(), 5);
        assert_eq!(out.row(4), &[4.0, 10.0, 24.0]);

        let c = tensor((0..4).map(|i| ([i, 0, 0], vec![0.0])).collect());
        match skip_concat(&a, &c) {
            Err(Error::Coordinate { witness, .. }) => assert_eq!(witness, [4, 0, 0]),
            other => panic!("{other:?}"),
        }
    }
}
