//! Balanced median-split kd-tree with exact nearest-neighbor queries.
//!
//! Results are identical to an exhaustive scan: squared distances are computed
//! with the same expression and ties resolve to the lowest point index.

use super::{dist2, is_finite_point, Cloud};
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::Point3;
use std::cmp::Ordering;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<T: Real> {
    points: Vec<Point3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

/// `(distance², index)` ordering used for every comparison in the tree.
#[inline]
fn better<T: Real>(d: T, i: usize, best_d: T, best_i: usize) -> bool {
    d < best_d || (d == best_d && i < best_i)
}

impl<T: Real> KdTree<T> {
    pub fn build(cloud: &Cloud<T>) -> Result<Self> {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::precondition("spatial index over an empty cloud"));
        }
        let mut tree = Self {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        let n = tree.points.len();
        tree.build_node(0, n);
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = self.points[self.order[start]];
        let mut hi = lo;
        for &i in &self.order[start..end] {
            let p = &self.points[i];
            for a in 0..3 {
                if p[a] < lo[a] {
                    lo[a] = p[a];
                }
                if p[a] > hi[a] {
                    hi[a] = p[a];
                }
            }
        }
        let spread = hi - lo;
        let mut axis = 0;
        for a in 1..3 {
            if spread[a] > spread[axis] {
                axis = a;
            }
        }
        axis
    }

    /// Nearest stored point to `q` as `(index, squared distance)`.
    pub fn nearest(&self, q: &Point3<T>) -> Result<(usize, T)> {
        if !is_finite_point(q) {
            return Err(Error::NonFinite("nearest-neighbor query".into()));
        }
        Ok(self.nearest_unchecked(q))
    }

    /// As [`KdTree::nearest`] for queries already known to be finite.
    pub fn nearest_unchecked(&self, q: &Point3<T>) -> (usize, T) {
        let mut best = (usize::MAX, T::max_value().unwrap_or_else(|| T::lit(f64::MAX)));
        // (node, squared distance to its splitting plane); re-checked on pop.
        let mut pending: Vec<(usize, T)> = vec![(0, T::zero())];
        while let Some((node, plane_d2)) = pending.pop() {
            if plane_d2 > best.1 {
                continue;
            }
            match &self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[*start..*end] {
                        let d = dist2(&self.points[i], q);
                        if best.0 == usize::MAX || better(d, i, best.1, best.0) {
                            best = (i, d);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = q[*axis] - *value;
                    let d2 = diff * diff;
                    let (near, far) = if diff <= T::zero() {
                        (*left, *right)
                    } else {
                        (*right, *left)
                    };
                    pending.push((far, d2));
                    pending.push((near, T::zero()));
                }
            }
        }
        best
    }

    /// The `k` nearest points sorted by `(squared distance, index)`.
    pub fn k_nearest(&self, q: &Point3<T>, k: usize) -> Result<Vec<(usize, T)>> {
        if !is_finite_point(q) {
            return Err(Error::NonFinite("k-nearest query".into()));
        }
        let k = k.min(self.points.len());
        let mut found: Vec<(usize, T)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return Ok(found);
        }
        let mut pending: Vec<(usize, T)> = vec![(0, T::zero())];
        while let Some((node, plane_d2)) = pending.pop() {
            if found.len() == k && plane_d2 > found[k - 1].1 {
                continue;
            }
            match &self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[*start..*end] {
                        let d = dist2(&self.points[i], q);
                        if found.len() < k || better(d, i, found[k - 1].1, found[k - 1].0) {
                            let pos = found
                                .iter()
                                .position(|&(j, e)| better(d, i, e, j))
                                .unwrap_or(found.len());
                            found.insert(pos, (i, d));
                            found.truncate(k);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = q[*axis] - *value;
                    let d2 = diff * diff;
                    let (near, far) = if diff <= T::zero() {
                        (*left, *right)
                    } else {
                        (*right, *left)
                    };
                    pending.push((far, d2));
                    pending.push((near, T::zero()));
                }
            }
        }
        Ok(found)
    }
}
