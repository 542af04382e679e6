//! Per-scan intensity normalization into [0, 1].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 256;

/// Equal-width histogram over [min, max] with its cumulative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityHistogram {
    min: f64,
    max: f64,
    counts: Vec<u64>,
    cumulative: Vec<u64>,
}

impl IntensityHistogram {
    pub fn build(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("intensity list"));
        }
        if bins < 2 {
            return Err(Error::Parameter(format!("need at least 2 bins, got {bins}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite intensity at index {i}")));
        }
        let (min, max) = min_max(values);
        let mut hist = Self {
            min,
            max,
            counts: vec![0; bins],
            cumulative: vec![0; bins],
        };
        for &v in values {
            let b = hist.bin_of(v);
            hist.counts[b] += 1;
        }
        let mut acc = 0;
        for (c, &h) in hist.cumulative.iter_mut().zip(&hist.counts) {
            acc += h;
            *c = acc;
        }
        Ok(hist)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn cumulative(&self) -> &[u64] {
        &self.cumulative
    }

    pub fn total(&self) -> u64 {
        *self.cumulative.last().unwrap_or(&0)
    }

    /// Smallest non-zero cumulative count.
    pub fn cumulative_min(&self) -> u64 {
        self.cumulative.iter().copied().find(|&c| c > 0).unwrap_or(0)
    }

    pub fn bin_of(&self, v: f64) -> usize {
        let bins = self.counts.len();
        if self.max <= self.min {
            return 0;
        }
        let t = (v - self.min) / (self.max - self.min);
        ((t * bins as f64).floor() as usize).min(bins - 1)
    }

    /// Equalized level of `v` in [0, 1].
    pub fn map(&self, v: f64) -> f64 {
        let n = self.total();
        let c_min = self.cumulative_min();
        if n == c_min {
            return 1.0;
        }
        let c = self.cumulative[self.bin_of(v)];
        (c - c_min) as f64 / (n - c_min) as f64
    }
}

/// Histogram equalization of one scan's intensities with `bins` levels.
///
/// Each value maps to `(C(b) − C_min) / (N − C_min)` where `C` is the cumulative
/// count of its bin and `C_min` the first non-zero cumulative count. A single
/// occupied bin yields all ones.
pub fn equalize(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    let hist = IntensityHistogram::build(values, bins)?;
    Ok(values.iter().map(|&v| hist.map(v)).collect())
}

/// Equalizes several scans with one shared histogram, returning per-scan outputs.
pub fn equalize_shared(scans: &[&[f64]], bins: usize) -> Result<Vec<Vec<f64>>> {
    let all: Vec<f64> = scans.iter().flat_map(|s| s.iter().copied()).collect();
    let hist = IntensityHistogram::build(&all, bins)?;
    Ok(scans
        .iter()
        .map(|s| s.iter().map(|&v| hist.map(v)).collect())
        .collect())
}

/// Min-max scaling; a constant list maps to zeros.
pub fn scale_to_unit(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("intensity list"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite intensity at index {i}")));
    }
    let (min, max) = min_max(values);
    let span = max - min;
    if span <= 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|&v| (v - min) / span).collect())
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntensityMode {
    None,
    MinMax,
    #[default]
    Equalize,
}

impl IntensityMode {
    pub fn name(self) -> &'static str {
        match self {
            IntensityMode::None => "none",
            IntensityMode::MinMax => "minmax",
            IntensityMode::Equalize => "equalize",
        }
    }
}

impl fmt::Display for IntensityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntensityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "minmax" => Ok(Self::MinMax),
            "equalize" => Ok(Self::Equalize),
            _ => Err(Error::Config(format!("unknown intensity mode '{s}'"))),
        }
    }
}

/// Applies `mode` to one scan.
pub fn normalize(values: &[f64], mode: IntensityMode, bins: usize) -> Result<Vec<f64>> {
    match mode {
        IntensityMode::None => Ok(values.to_vec()),
        IntensityMode::MinMax => scale_to_unit(values),
        IntensityMode::Equalize => equalize(values, bins),
    }
}
