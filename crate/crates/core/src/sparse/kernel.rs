use rayon::prelude::*;

use super::tensor::{Coord, CoordinateSet};
use crate::error::{Error, Result};

/// Kernel offsets in units of the input stride, x-major.
///
/// Odd sizes are centered (`-(k-1)/2 ..= (k-1)/2`); even sizes span `0..k`.
pub fn kernel_offsets(kernel_size: usize) -> Vec<Coord> {
    let k = kernel_size as i32;
    let lo = if k % 2 == 1 { -(k - 1) / 2 } else { 0 };
    let mut out = Vec::with_capacity((k * k * k) as usize);
    for dx in lo..lo + k {
        for dy in lo..lo + k {
            for dz in lo..lo + k {
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

/// Input/output row pairing for every kernel offset.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMap {
    pub kernel_size: usize,
    pub stride: i32,
    pub offsets: Vec<Coord>,
    /// Fine-side coordinates (the convolution input).
    pub fine: CoordinateSet,
    /// Coarse-side coordinates (the convolution output).
    pub coarse: CoordinateSet,
    /// `pairs[o]` lists `(fine row, coarse row)` with
    /// `fine coord = coarse coord + offsets[o] * fine stride`, sorted by coarse row.
    pub pairs: Vec<Vec<(usize, usize)>>,
}

impl KernelMap {
    pub fn pair_count(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }
}

fn check_params(kernel_size: usize, stride: i32) -> Result<()> {
    if kernel_size == 0 {
        return Err(Error::Parameter("kernel size must be positive".into()));
    }
    if stride < 1 {
        return Err(Error::Parameter(format!("stride must be >= 1, got {stride}")));
    }
    Ok(())
}

/// Builds the map of a (possibly strided) convolution over `input`.
///
/// With stride 1 the output coordinates are the input coordinates; otherwise they
/// are the input coordinates floored to the coarser grid.
pub fn build_kernel_map(input: &CoordinateSet, kernel_size: usize, stride: i32) -> Result<KernelMap> {
    check_params(kernel_size, stride)?;
    let coarse = input.downsample(stride);
    Ok(pair_up(input.clone(), coarse, kernel_size, stride))
}

/// Builds the map of a transposed convolution scattering from `coarse` back onto `target`.
///
/// Every coarse coordinate must be the downsampled image of at least one target
/// coordinate, otherwise its features would have nowhere to go.
pub fn build_transposed_map(
    coarse: &CoordinateSet,
    target: &CoordinateSet,
    kernel_size: usize,
    stride: i32,
) -> Result<KernelMap> {
    check_params(kernel_size, stride)?;
    let expected = target.stride().map(|s| s * stride);
    if coarse.stride() != expected {
        return Err(Error::Shape(format!(
            "coarse stride {:?} does not match target stride {:?} x {stride}",
            coarse.stride(),
            target.stride()
        )));
    }
    let support = target.downsample(stride);
    if let Some(&w) = coarse.coords().iter().find(|&&c| support.row_of(c).is_none()) {
        return Err(Error::Coordinate {
            message: "target set does not cover the upsampled support".into(),
            witness: w,
        });
    }
    Ok(pair_up(target.clone(), coarse.clone(), kernel_size, stride))
}

fn pair_up(fine: CoordinateSet, coarse: CoordinateSet, kernel_size: usize, stride: i32) -> KernelMap {
    let offsets = kernel_offsets(kernel_size);
    let fstride = fine.stride();
    let pairs = offsets
        .par_iter()
        .map(|off| {
            coarse
                .coords()
                .iter()
                .enumerate()
                .filter_map(|(out_row, c)| {
                    let q = [
                        c[0] + off[0] * fstride[0],
                        c[1] + off[1] * fstride[1],
                        c[2] + off[2] * fstride[2],
                    ];
                    fine.row_of(q).map(|in_row| (in_row, out_row))
                })
                .collect()
        })
        .collect();
    KernelMap {
        kernel_size,
        stride,
        offsets,
        fine,
        coarse,
        pairs,
    }
}
