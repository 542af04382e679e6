use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::recall::squared_distance;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
/// Stop once no centroid moves farther than this.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after every assignment step.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeans {
    pub fn wcss(&self) -> f64 {
        *self.wcss_history.last().unwrap_or(&0.0)
    }
}

fn check(data: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if k > data.len() {
        return Err(Error::Parameter(format!("k = {k} exceeds {} descriptors", data.len())));
    }
    let dim = data[0].len();
    if data.iter().any(|d| d.len() != dim) {
        return Err(Error::Shape("descriptors differ in dimension".into()));
    }
    Ok(dim)
}

/// k-means++ seeding: first center uniform, then proportional to squared distance.
pub fn kmeans_plus_plus(data: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check(data, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![data[rng.gen_range(0..data.len())].clone()];
    let mut nearest: Vec<f64> = data.iter().map(|d| squared_distance(d, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = data.len() - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..data.len())
        };
        let c = data[pick].clone();
        for (n, d) in nearest.iter_mut().zip(data) {
            *n = n.min(squared_distance(d, &c));
        }
        centers.push(c);
    }
    Ok(centers)
}

/// Seeded k-means: k-means++ initialization followed by Lloyd iterations.
pub fn kmeans(data: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    let init = kmeans_plus_plus(data, k, seed)?;
    kmeans_from(data, init)
}

/// Lloyd iterations from the given centers until movement < [`TOLERANCE`]
/// or [`MAX_ITERATIONS`]. Ties go to the lower cluster index; an empty cluster
/// keeps its previous center.
pub fn kmeans_from(data: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Result<KMeans> {
    let k = centroids.len();
    let dim = check(data, k)?;
    if centroids.iter().any(|c| c.len() != dim) {
        return Err(Error::Shape("initial centers differ in dimension from data".into()));
    }
    let mut labels = vec![0; data.len()];
    let mut wcss_history = Vec::new();
    let mut iterations = 0;
    loop {
        wcss_history.push(assign(data, &centroids, &mut labels));
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (d, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(d) {
                *s += v;
            }
        }
        let mut movement: f64 = 0.0;
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n == 0 {
                continue;
            }
            let next: Vec<f64> = s.into_iter().map(|v| v / n as f64).collect();
            movement = movement.max(squared_distance(c, &next).sqrt());
            *c = next;
        }
        if movement < TOLERANCE {
            wcss_history.push(assign(data, &centroids, &mut labels));
            break;
        }
    }
    Ok(KMeans {
        labels,
        centroids,
        wcss_history,
        iterations,
    })
}

fn assign(data: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut wcss = 0.0;
    for (d, l) in data.iter().zip(labels.iter_mut()) {
        let (best, dist) = centroids
            .iter()
            .enumerate()
            .map(|(i, c)| (i, squared_distance(d, c)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        *l = best;
        wcss += dist;
    }
    wcss
}
