use crate::error::{Error, Result};

/// Sigmoid temperature and optional top-k truncation for [`smooth_ap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothApConfig {
    pub tau: f64,
    pub truncation: Option<usize>,
}

impl Default for SmoothApConfig {
    fn default() -> Self {
        Self {
            tau: 0.01,
            truncation: None,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid-relaxed average precision of one query's candidate ranking.
///
/// For each positive `i`, its rank among all candidates and among positives is
/// `1 + Σ_{j≠i} σ((s_j − s_i)/τ)`; the value is the mean ratio over positives.
/// With truncation only the `k` highest-scoring candidates (index order on ties)
/// take part; if none of them is positive the value is 0.
pub fn smooth_ap(scores: &[f64], positives: &[bool], config: &SmoothApConfig) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} positive flags",
            scores.len(),
            positives.len()
        )));
    }
    if !(config.tau > 0.0 && config.tau.is_finite()) {
        return Err(Error::Parameter(format!("tau must be positive, got {}", config.tau)));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Data(format!("non-finite score at index {i}")));
    }
    if !positives.iter().any(|&p| p) {
        return Err(Error::Degenerate("ranking has no positive candidate"));
    }
    let mut pool: Vec<usize> = (0..scores.len()).collect();
    if let Some(k) = config.truncation {
        if k == 0 {
            return Err(Error::Parameter("truncation must keep at least one candidate".into()));
        }
        pool.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        pool.truncate(k);
        pool.sort_unstable();
    }
    let pos: Vec<usize> = pool.iter().copied().filter(|&i| positives[i]).collect();
    if pos.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &i in &pos {
        let rel = |j: usize| sigmoid((scores[j] - scores[i]) / config.tau);
        let rank_all = 1.0 + pool.iter().filter(|&&j| j != i).map(|&j| rel(j)).sum::<f64>();
        let rank_pos = 1.0 + pos.iter().filter(|&&j| j != i).map(|&j| rel(j)).sum::<f64>();
        total += rank_pos / rank_all;
    }
    Ok(total / pos.len() as f64)
}
