//! Points, clouds, affine transforms and exact nearest-neighbour search.

mod neighbors;
mod transform;

pub use neighbors::{nearest_neighbors, KdTree, Pairing};
pub(crate) use neighbors::pair_with_tree;
pub use transform::{apply_transform, compose, invert, rotation_about, AffineTransform3, TransformKind};

use crate::error::{Error, Result};

/// World-coordinate point in millimetres.
pub type Point3 = nalgebra::Point3<f64>;

/// Ordered points with an optional scalar per point (perfusion counts).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub values: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        Self { points, values: None }
    }

    pub fn with_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} points",
                values.len(),
                self.points.len()
            )));
        }
        self.values = Some(values);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3> {
        centroid(&self.points)
    }

    /// Checks the value payload length and that every coordinate is finite.
    pub fn validate(&self) -> Result<()> {
        if let Some(v) = &self.values {
            if v.len() != self.points.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} values for {} points",
                    v.len(),
                    self.points.len()
                )));
            }
        }
        if let Some(i) = self.points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidData(format!("point {i} has a non-finite coordinate")));
        }
        Ok(())
    }

    /// Appends another cloud. Values are kept only if both sides carry them.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let values = match (&self.values, &other.values) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        PointCloud { points, values }
    }
}

pub(crate) fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let sum = points
        .iter()
        .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}
