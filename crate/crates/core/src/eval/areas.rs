use crate::cloud::Pose;
use crate::error::{Error, Result};

/// Axis-aligned square test region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestArea {
    pub center_x: f64,
    pub center_y: f64,
    pub side: f64,
}

impl TestArea {
    pub fn new(center_x: f64, center_y: f64, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite() && center_x.is_finite() && center_y.is_finite()) {
            return Err(Error::Parameter(format!(
                "test area ({center_x}, {center_y}) needs a positive side, got {side}"
            )));
        }
        Ok(Self {
            center_x,
            center_y,
            side,
        })
    }

    /// Boundary counts as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let h = self.side / 2.0;
        (x - self.center_x).abs() <= h && (y - self.center_y).abs() <= h
    }
}

/// Partitions items into those whose pose falls in any area and the rest, keeping order.
pub fn split_by_areas<T, F>(items: Vec<T>, areas: &[TestArea], pose: F) -> (Vec<T>, Vec<T>)
where
    F: Fn(&T) -> &Pose,
{
    items.into_iter().partition(|item| {
        let p = pose(item);
        areas.iter().any(|a| a.contains(p.x, p.y))
    })
}
