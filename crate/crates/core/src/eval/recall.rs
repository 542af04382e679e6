use rayon::prelude::*;

use super::areas::TestArea;
use super::descriptor_set::DescriptorSet;
use crate::error::{Error, Result};

/// Retrieval protocol shared by all recall computations.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocol {
    /// Planar distance (meters) under which a database entry is a true match.
    pub positive_threshold: f64,
    pub test_areas: Vec<TestArea>,
    /// Lower bound on the candidate count used for recall@1%.
    pub recall_percent_floor: usize,
    /// Skip database entries with the query's own source id.
    pub exclude_same_source: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            positive_threshold: 25.0,
            test_areas: Vec::new(),
            recall_percent_floor: 1,
            exclude_same_source: false,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.positive_threshold > 0.0 && self.positive_threshold.is_finite()) {
            return Err(Error::Parameter(format!(
                "positive threshold must be positive, got {}",
                self.positive_threshold
            )));
        }
        if self.recall_percent_floor == 0 {
            return Err(Error::Parameter("recall@1% floor must be at least 1".into()));
        }
        for a in &self.test_areas {
            TestArea::new(a.center_x, a.center_y, a.side)?;
        }
        Ok(())
    }
}

/// How many nearest database entries a query may inspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecallDepth {
    Top(usize),
    /// ⌈1% of the database⌉, but at least the protocol floor.
    OnePercent,
}

impl RecallDepth {
    pub fn candidates(self, database_len: usize, protocol: &EvalProtocol) -> usize {
        match self {
            RecallDepth::Top(n) => n,
            RecallDepth::OnePercent => database_len.div_ceil(100).max(protocol.recall_percent_floor),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallResult {
    /// Candidates inspected per query.
    pub depth: usize,
    pub successes: usize,
    /// Queries with at least one true match in the database.
    pub evaluated: usize,
}

impl RecallResult {
    /// `None` when no query could be evaluated.
    pub fn value(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.successes as f64 / self.evaluated as f64)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exhaustive recall@N. Ties in descriptor distance are broken by database index.
pub fn recall_at(
    queries: &DescriptorSet,
    database: &DescriptorSet,
    protocol: &EvalProtocol,
    depth: RecallDepth,
) -> Result<RecallResult> {
    protocol.validate()?;
    if queries.is_empty() {
        return Err(Error::Empty("query set"));
    }
    if database.is_empty() {
        return Err(Error::Empty("database set"));
    }
    if queries.dim() != database.dim() {
        return Err(Error::Shape(format!(
            "query dimension {} differs from database dimension {}",
            queries.dim(),
            database.dim()
        )));
    }
    let n = depth.candidates(database.len(), protocol);
    if n == 0 {
        return Err(Error::Parameter("recall depth must be at least 1".into()));
    }
    let db = database.entries();
    let outcomes: Vec<Option<bool>> = queries
        .entries()
        .par_iter()
        .map(|q| {
            let usable = |j: usize| !(protocol.exclude_same_source && db[j].source_id == q.source_id);
            let is_positive = |j: usize| q.pose.planar_distance(&db[j].pose) <= protocol.positive_threshold;
            if !(0..db.len()).any(|j| usable(j) && is_positive(j)) {
                return None;
            }
            let mut ranked: Vec<(f64, usize)> = (0..db.len())
                .filter(|&j| usable(j))
                .map(|j| (squared_distance(&q.descriptor, &db[j].descriptor), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            let take = n.min(ranked.len());
            if take < ranked.len() {
                ranked.select_nth_unstable_by(take - 1, cmp);
            }
            Some(ranked[..take].iter().any(|&(_, j)| is_positive(j)))
        })
        .collect();
    let evaluated = outcomes.iter().filter(|o| o.is_some()).count();
    let successes = outcomes.iter().filter(|o| **o == Some(true)).count();
    Ok(RecallResult {
        depth: n,
        successes,
        evaluated,
    })
}
