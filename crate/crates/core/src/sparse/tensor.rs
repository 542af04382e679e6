use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Integer voxel index.
pub type Coord = [i32; 3];

/// Unique voxel coordinates at one tensor stride, with a coordinate → row lookup.
///
/// Coordinates are kept sorted lexicographically so row order never depends on
/// the order points arrived in. Axes with a period (the azimuth axis of a
/// full-circle scan) are stored reduced into `[0, period)`.
#[derive(Debug, Clone)]
pub struct CoordinateSet {
    coords: Vec<Coord>,
    stride: [i32; 3],
    periods: [Option<i32>; 3],
    lookup: HashMap<Coord, usize>,
}

impl PartialEq for CoordinateSet {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords && self.stride == other.stride && self.periods == other.periods
    }
}

impl CoordinateSet {
    /// Builds a set from arbitrary coordinates: wraps periodic axes, sorts, rejects duplicates.
    pub fn new(coords: Vec<Coord>, stride: [i32; 3], periods: [Option<i32>; 3]) -> Result<Self> {
        if stride.iter().any(|&s| s < 1) {
            return Err(Error::Parameter(format!("tensor stride must be positive, got {stride:?}")));
        }
        if periods.iter().flatten().any(|&p| p < 1) {
            return Err(Error::Parameter(format!("axis period must be positive, got {periods:?}")));
        }
        let mut coords: Vec<Coord> = coords
            .into_iter()
            .map(|c| canonical(c, &stride, &periods))
            .collect();
        coords.sort_unstable();
        if let Some(w) = coords.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Coordinate {
                message: "duplicate coordinate".into(),
                witness: w[0],
            });
        }
        Ok(Self::from_sorted(coords, stride, periods))
    }

    pub(crate) fn from_sorted(coords: Vec<Coord>, stride: [i32; 3], periods: [Option<i32>; 3]) -> Self {
        let lookup = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Self {
            coords,
            stride,
            periods,
            lookup,
        }
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn stride(&self) -> [i32; 3] {
        self.stride
    }

    pub fn periods(&self) -> [Option<i32>; 3] {
        self.periods
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Row of `c` after periodic wrapping, if occupied.
    pub fn row_of(&self, c: Coord) -> Option<usize> {
        self.lookup.get(&canonical(c, &self.stride, &self.periods)).copied()
    }

    /// Coordinates of the set after downsampling by `factor` on every axis.
    pub fn downsample(&self, factor: i32) -> Self {
        if factor == 1 {
            return self.clone();
        }
        let stride = self.stride.map(|s| s * factor);
        let mut coords: Vec<Coord> = self
            .coords
            .iter()
            .map(|&c| canonical(c, &stride, &self.periods))
            .collect();
        coords.sort_unstable();
        coords.dedup();
        Self::from_sorted(coords, stride, self.periods)
    }

    /// One coordinate present in exactly one of the two sets.
    pub fn witness_difference(&self, other: &CoordinateSet) -> Option<Coord> {
        self.coords
            .iter()
            .find(|c| !other.lookup.contains_key(*c))
            .or_else(|| other.coords.iter().find(|c| !self.lookup.contains_key(*c)))
            .copied()
    }
}

/// Wraps periodic axes and aligns every axis to a multiple of the stride.
pub(crate) fn canonical(c: Coord, stride: &[i32; 3], periods: &[Option<i32>; 3]) -> Coord {
    let mut out = c;
    for a in 0..3 {
        let mut v = c[a];
        if let Some(p) = periods[a] {
            v = v.rem_euclid(p);
        }
        out[a] = v.div_euclid(stride[a]) * stride[a];
    }
    out
}

/// Feature rows attached to a shared [`CoordinateSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    coords: Arc<CoordinateSet>,
    features: Vec<f64>,
    dim: usize,
}

impl SparseTensor {
    /// `features` is row-major with `dim` values per coordinate row.
    pub fn new(coords: Arc<CoordinateSet>, features: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("feature dimension must be positive".into()));
        }
        if features.len() != coords.len() * dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} rows of dimension {dim}",
                features.len(),
                coords.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature in row {}", i / dim)));
        }
        Ok(Self {
            coords,
            features,
            dim,
        })
    }

    /// Convenience constructor from (coordinate, feature row) pairs at stride 1.
    pub fn from_rows(rows: Vec<(Coord, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.1.len());
        let mut rows = rows;
        rows.sort_by_key(|r| r.0);
        if rows.iter().any(|r| r.1.len() != dim) {
            return Err(Error::Shape("feature rows differ in length".into()));
        }
        let coords = CoordinateSet::new(rows.iter().map(|r| r.0).collect(), [1; 3], [None; 3])?;
        let features = rows.into_iter().flat_map(|r| r.1).collect();
        Self::new(Arc::new(coords), features, dim)
    }

    pub(crate) fn from_parts_unchecked(coords: Arc<CoordinateSet>, features: Vec<f64>, dim: usize) -> Self {
        debug_assert_eq!(features.len(), coords.len() * dim);
        Self {
            coords,
            features,
            dim,
        }
    }

    pub fn coordinate_set(&self) -> &Arc<CoordinateSet> {
        &self.coords
    }

    pub fn coords(&self) -> &[Coord] {
        self.coords.coords()
    }

    pub fn stride(&self) -> [i32; 3] {
        self.coords.stride()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Feature row stored at coordinate `c`.
    pub fn feature_at(&self, c: Coord) -> Option<&[f64]> {
        self.coords.row_of(c).map(|r| self.row(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_rejected() {
        let err = CoordinateSet::new(vec![[0, 0, 0], [1, 0, 0], [0, 0, 0]], [1; 3], [None; 3]).unwrap_err();
        assert!(matches!(err, Error::Coordinate { witness: [0, 0, 0], .. }));
    }

    #[test]
    fn lookup_is_bijective_and_sorted() {
        let set = CoordinateSet::new(vec![[3, 1, 0], [-1, 2, 2], [0, 0, 0]], [1; 3], [None; 3]).unwrap();
        assert_eq!(set.coords(), &[[-1, 2, 2], [0, 0, 0], [3, 1, 0]]);
        for (i, &c) in set.coords().iter().enumerate() {
            assert_eq!(set.row_of(c), Some(i));
        }
    }

    #[test]
    fn periodic_axis_wraps() {
        let set = CoordinateSet::new(vec![[0, -1, 0], [0, 5, 0]], [1; 3], [None, Some(180), None]).unwrap();
        assert_eq!(set.coords(), &[[0, 5, 0], [0, 179, 0]]);
        assert_eq!(set.row_of([0, 185, 0]), Some(0));
        assert_eq!(set.row_of([0, -1, 0]), Some(1));
    }

    #[test]
    fn downsample_floors() {
        let set = CoordinateSet::new(vec![[-1, 0, 0], [0, 0, 0], [1, 1, 1], [3, 0, 0]], [1; 3], [None; 3]).unwrap();
        let d = set.downsample(2);
        assert_eq!(d.coords(), &[[-2, 0, 0], [0, 0, 0], [2, 0, 0]]);
        assert_eq!(d.stride(), [2; 3]);
    }

    #[test]
    fn shape_checks() {
        let set = Arc::new(CoordinateSet::new(vec![[0, 0, 0]], [1; 3], [None; 3]).unwrap());
        assert!(SparseTensor::new(set.clone(), vec![1.0, 2.0], 1).is_err());
        assert!(SparseTensor::new(set.clone(), vec![f64::NAN], 1).is_err());
        assert!(SparseTensor::new(set, vec![1.0, 2.0], 2).is_ok());
    }
}
