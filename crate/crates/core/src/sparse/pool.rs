use std::fmt;

use super::tensor::SparseTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolKind {
    Mean,
    Max,
    /// Generalized mean `(Σ max(f, 0)^p / n)^(1/p)`.
    Gem { p: f64 },
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolKind::Mean => f.write_str("mean"),
            PoolKind::Max => f.write_str("max"),
            PoolKind::Gem { p } => write!(f, "gem p={p}"),
        }
    }
}

/// Fixed-length global summary of one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Vec<f64>,
    normalized: bool,
}

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite descriptor component {i}")));
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit Euclidean norm; a zero vector is left as is and stays unflagged.
    pub fn normalize(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
            self.normalized = true;
        }
        self
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Per-channel pooling over all voxels.
pub fn global_pool(input: &SparseTensor, kind: PoolKind, normalize: bool) -> Result<Descriptor> {
    if input.is_empty() {
        return Err(Error::Empty("sparse tensor"));
    }
    let dim = input.dim();
    let n = input.len() as f64;
    let mut acc = match kind {
        PoolKind::Max => vec![f64::NEG_INFINITY; dim],
        _ => vec![0.0; dim],
    };
    match kind {
        PoolKind::Mean => {
            for i in 0..input.len() {
                for (a, v) in acc.iter_mut().zip(input.row(i)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= n);
        }
        PoolKind::Max => {
            for i in 0..input.len() {
                for (a, &v) in acc.iter_mut().zip(input.row(i)) {
                    *a = a.max(v);
                }
            }
        }
        PoolKind::Gem { p } => {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::Parameter(format!("GeM power must be >= 1, got {p}")));
            }
            let pow = |x: f64, e: f64| if e == 1.0 { x } else { x.powf(e) };
            for i in 0..input.len() {
                for (a, &v) in acc.iter_mut().zip(input.row(i)) {
                    *a += pow(v.max(0.0), p);
                }
            }
            acc.iter_mut().for_each(|a| *a = pow(*a / n, 1.0 / p));
        }
    }
    let d = Descriptor::new(acc)?;
    Ok(if normalize { d.normalize() } else { d })
}
