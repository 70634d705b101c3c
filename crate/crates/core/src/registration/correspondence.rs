use crate::error::{Error, Result};
use crate::geom::{Cloud, KdTree, Similarity};
use crate::scalar::Real;

/// For each ground-truth point `i`, the index of its nearest transformed prior point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrespondenceMap {
    indices: Vec<usize>,
    prior_len: usize,
}

impl CorrespondenceMap {
    pub fn new(indices: Vec<usize>, prior_len: usize) -> Result<Self> {
        if let Some((i, &j)) = indices.iter().enumerate().find(|(_, &j)| j >= prior_len) {
            return Err(Error::precondition(format!(
                "correspondence {i} -> {j} out of range for prior of {prior_len} points"
            )));
        }
        Ok(Self { indices, prior_len })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn prior_len(&self) -> usize {
        self.prior_len
    }

    pub fn is_bijection(&self) -> bool {
        if self.indices.len() != self.prior_len {
            return false;
        }
        let mut seen = vec![false; self.prior_len];
        for &j in &self.indices {
            if seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

/// `J(i) = argmin_j ‖V_i − A·prior_j‖²`, ties to the lowest `j`. Not necessarily injective.
pub fn pseudo_correspondence<T: Real>(
    ground_truth: &Cloud<T>,
    transform: &Similarity<T>,
    prior: &Cloud<T>,
) -> Result<CorrespondenceMap> {
    ground_truth.require_non_empty("pseudo correspondence")?;
    prior.require_non_empty("pseudo correspondence")?;
    let tree = KdTree::build(&transform.apply(prior))?;
    let indices = ground_truth
        .points()
        .iter()
        .map(|p| tree.nearest_unchecked(p).0)
        .collect();
    CorrespondenceMap::new(indices, prior.len())
}
