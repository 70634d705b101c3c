use super::is_finite_point;
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{Point3, Vector3};

/// Ordered set of 3D points in meters, optionally tagged with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloud<T: Real> {
    points: Vec<Point3<T>>,
    labels: Option<Vec<i32>>,
}

impl<T: Real> Default for Cloud<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Real> Cloud<T> {
    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            labels: None,
        }
    }

    /// Builds a cloud, rejecting non-finite coordinates.
    pub fn new(points: Vec<Point3<T>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !is_finite_point(p)) {
            return Err(Error::NonFinite(format!("cloud point {i}")));
        }
        Ok(Self {
            points,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::shape("cloud labels", self.points.len(), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Internal constructor for points produced by finite arithmetic on finite inputs.
    pub(crate) fn from_points_unchecked(points: Vec<Point3<T>>) -> Self {
        Self {
            points,
            labels: None,
        }
    }

    pub fn from_slices(xyz: &[[T; 3]]) -> Result<Self> {
        Self::new(xyz.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<T>> {
        self.points
    }

    pub fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::precondition(format!("{what}: cloud is empty")))
        } else {
            Ok(())
        }
    }

    /// Arithmetic mean of the points; the origin for an empty cloud.
    pub fn centroid(&self) -> Point3<T> {
        if self.points.is_empty() {
            return Point3::origin();
        }
        let mut acc = Vector3::zeros();
        for p in &self.points {
            acc += p.coords;
        }
        Point3::from(acc / T::from_usize_lossy(self.points.len()))
    }

    pub fn translated(&self, t: &Vector3<T>) -> Self {
        Self {
            points: self.points.iter().map(|p| p + t).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Copy with the centroid moved to the origin.
    pub fn centered(&self) -> Self {
        let c = self.centroid();
        self.translated(&-c.coords)
    }

    /// Copy with every coordinate multiplied by `s` (used for meter → millimeter reporting).
    pub fn scaled(&self, s: T) -> Self {
        Self {
            points: self.points.iter().map(|p| p * s).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Subset in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Converts to another scalar type (e.g. `f32` for storage).
    pub fn cast<U: Real>(&self) -> Cloud<U> {
        Cloud {
            points: self
                .points
                .iter()
                .map(|p| {
                    Point3::new(
                        U::lit(p.x.to_f64_lossy()),
                        U::lit(p.y.to_f64_lossy()),
                        U::lit(p.z.to_f64_lossy()),
                    )
                })
                .collect(),
            labels: self.labels.clone(),
        }
    }

    /// Concatenation of two clouds; labels are kept only when both carry them.
    pub fn concat(&self, other: &Self) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self { points, labels }
    }
}
