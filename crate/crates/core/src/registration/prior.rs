//! Shape-prior sources: a Fibonacci-lattice sphere and a prototype library.

use crate::error::{Error, Result};
use crate::geom::{farthest_point_sampling, Cloud};
use crate::scalar::Real;
use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// A source of coarse shape priors keyed by category label.
pub trait PriorProvider<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    /// Deterministic for fixed `(category, seed)`; never returns an empty cloud.
    fn prior(&self, category: &str, seed: u64) -> Result<Cloud<T>>;
}

/// `n` points on a sphere of `radius` placed on an antipodally symmetric
/// Fibonacci lattice, then rotated by a seeded random rotation.
pub fn sphere_prior<T: Real>(n: usize, radius: T, seed: u64) -> Result<Cloud<T>> {
    if n < 4 {
        return Err(Error::precondition(format!("sphere prior needs n >= 4, got {n}")));
    }
    if !(radius > T::zero() && radius.is_finite()) {
        return Err(Error::precondition(format!("sphere radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0f64),
    );
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let rot = if axis.norm() > 1e-9 {
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle)
    } else {
        Rotation3::identity()
    };
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let nf = n as f64;
    let lattice = |i: usize| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / nf;
        let rho = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
    };
    // Antipodal pairs (i, n-1-i) cancel exactly; an odd count closes with an
    // equilateral triangle on the equator in place of the middle three points.
    let half = if n % 2 == 0 { n / 2 } else { (n - 3) / 2 };
    let mut units = vec![Vector3::zeros(); n];
    for i in 0..half {
        let u = lattice(i);
        units[i] = u;
        units[n - 1 - i] = -u;
    }
    if n % 2 == 1 {
        let phi0 = golden * half as f64;
        for k in 0..3 {
            let phi = phi0 + k as f64 * std::f64::consts::TAU / 3.0;
            units[half + k] = Vector3::new(phi.cos(), phi.sin(), 0.0);
        }
    }
    let r = radius.to_f64_lossy();
    let points = units
        .into_iter()
        .map(|u| {
            let unit = rot * u;
            let unit = unit / unit.norm();
            Point3::new(T::lit(unit.x * r), T::lit(unit.y * r), T::lit(unit.z * r))
        })
        .collect();
    Cloud::new(points)
}

/// Prototype clouds keyed by category.
#[derive(Debug, Clone, Default)]
pub struct PrototypeLibrary<T: Real> {
    entries: BTreeMap<String, Cloud<T>>,
}

impl<T: Real> PrototypeLibrary<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, category: impl Into<String>, cloud: Cloud<T>) -> Result<()> {
        cloud.require_non_empty("prototype")?;
        self.entries.insert(category.into(), cloud);
        Ok(())
    }

    pub fn get(&self, category: &str) -> Result<&Cloud<T>> {
        self.entries.get(category).ok_or_else(|| Error::NotFound {
            key: category.to_string(),
            available: self.categories(),
        })
    }

    pub fn categories(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Cloud<T>)> {
        self.entries.iter()
    }
}

/// Looks up `category` and resamples it to `count` points by farthest-point
/// sampling from index 0. Smaller prototypes are padded by cycling their points.
pub fn library_prior<T: Real>(category: &str, library: &PrototypeLibrary<T>, count: usize) -> Result<Cloud<T>> {
    if count == 0 {
        return Err(Error::precondition("library prior point count must be positive"));
    }
    let proto = library.get(category)?;
    let idx: Vec<usize> = if proto.len() >= count {
        farthest_point_sampling(proto.points(), count, 0)
    } else {
        (0..count).map(|i| i % proto.len()).collect()
    };
    Ok(proto.select(&idx))
}

#[derive(Debug, Clone)]
pub struct SphereSource<T: Real> {
    pub count: usize,
    pub radius: T,
}

impl<T: Real> PriorProvider<T> for SphereSource<T> {
    fn name(&self) -> &str {
        "sphere"
    }

    fn prior(&self, _category: &str, seed: u64) -> Result<Cloud<T>> {
        sphere_prior(self.count, self.radius, seed)
    }
}

#[derive(Debug, Clone)]
pub struct LibrarySource<T: Real> {
    pub library: PrototypeLibrary<T>,
    pub count: usize,
}

impl<T: Real> PriorProvider<T> for LibrarySource<T> {
    fn name(&self) -> &str {
        "library"
    }

    fn prior(&self, category: &str, _seed: u64) -> Result<Cloud<T>> {
        library_prior(category, &self.library, self.count)
    }
}
