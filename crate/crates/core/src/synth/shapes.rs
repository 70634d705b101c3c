use crate::error::{Error, Result};
use crate::geom::Cloud;
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeFamily {
    Box,
    Can,
    Sphere,
    Bottle,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 4] = [ShapeFamily::Box, ShapeFamily::Can, ShapeFamily::Sphere, ShapeFamily::Bottle];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Box => "box",
            ShapeFamily::Can => "can",
            ShapeFamily::Sphere => "sphere",
            ShapeFamily::Bottle => "bottle",
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::NotFound {
                key: s.to_string(),
                available: ShapeFamily::ALL.iter().map(|f| f.name().to_string()).collect(),
            })
    }
}

/// Parametric shape, dimensions in meters. Cylinders run along z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Box { x: f64, y: f64, z: f64 },
    Can { radius: f64, height: f64 },
    Sphere { radius: f64 },
    /// Body cylinder with a narrower neck cylinder stacked on top.
    Bottle { radius: f64, height: f64, neck_radius: f64, neck_height: f64 },
}

impl Shape {
    pub fn family(&self) -> ShapeFamily {
        match self {
            Shape::Box { .. } => ShapeFamily::Box,
            Shape::Can { .. } => ShapeFamily::Can,
            Shape::Sphere { .. } => ShapeFamily::Sphere,
            Shape::Bottle { .. } => ShapeFamily::Bottle,
        }
    }

    fn dims(&self) -> Vec<f64> {
        match *self {
            Shape::Box { x, y, z } => vec![x, y, z],
            Shape::Can { radius, height } => vec![radius, height],
            Shape::Sphere { radius } => vec![radius],
            Shape::Bottle { radius, height, neck_radius, neck_height } => vec![radius, height, neck_radius, neck_height],
        }
    }

    /// Largest extent of the shape.
    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::Box { x, y, z } => (x * x + y * y + z * z).sqrt(),
            Shape::Can { radius, height } => (4.0 * radius * radius + height * height).sqrt(),
            Shape::Sphere { radius } => 2.0 * radius,
            Shape::Bottle { radius, height, neck_height, .. } => {
                (4.0 * radius * radius + (height + neck_height).powi(2)).sqrt()
            }
        }
    }

    /// Canonical mid-range instance of a family.
    pub fn canonical(family: ShapeFamily) -> Self {
        match family {
            ShapeFamily::Box => Shape::Box { x: 0.08, y: 0.06, z: 0.1 },
            ShapeFamily::Can => Shape::Can { radius: 0.035, height: 0.1 },
            ShapeFamily::Sphere => Shape::Sphere { radius: 0.04 },
            ShapeFamily::Bottle => Shape::Bottle { radius: 0.03, height: 0.1, neck_radius: 0.012, neck_height: 0.04 },
        }
    }

    /// Random instance of a family with each dimension within ±25% of canonical.
    pub fn random<R: Rng>(family: ShapeFamily, rng: &mut R) -> Self {
        let mut j = || rng.random_range(0.75..1.25);
        match Shape::canonical(family) {
            Shape::Box { x, y, z } => Shape::Box { x: x * j(), y: y * j(), z: z * j() },
            Shape::Can { radius, height } => Shape::Can { radius: radius * j(), height: height * j() },
            Shape::Sphere { radius } => Shape::Sphere { radius: radius * j() },
            Shape::Bottle { radius, height, neck_radius, neck_height } => Shape::Bottle {
                radius: radius * j(),
                height: height * j(),
                neck_radius: neck_radius * j(),
                neck_height: neck_height * j(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub points: usize,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shape.dims().iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::precondition(format!("{} dimensions must be positive", self.shape.family())));
        }
        if let Shape::Bottle { radius, neck_radius, .. } = self.shape {
            if neck_radius > radius {
                return Err(Error::precondition("bottle neck wider than its body"));
            }
        }
        if self.points == 0 {
            return Err(Error::precondition("shape needs at least one point"));
        }
        Ok(())
    }
}

/// Area-weighted surface primitive used by the samplers.
enum Patch {
    /// Axis-aligned rectangle: fixed axis and value, extents on the other two.
    Rect { axis: usize, value: f64, half: [f64; 2] },
    /// Cylinder side between z0 and z1.
    Side { radius: f64, z0: f64, z1: f64 },
    /// Annulus (or disk when inner = 0) at height z.
    Ring { inner: f64, outer: f64, z: f64 },
    Ball { radius: f64 },
}

impl Patch {
    fn area(&self) -> f64 {
        match *self {
            Patch::Rect { half, .. } => 4.0 * half[0] * half[1],
            Patch::Side { radius, z0, z1 } => 2.0 * PI * radius * (z1 - z0),
            Patch::Ring { inner, outer, .. } => PI * (outer * outer - inner * inner),
            Patch::Ball { radius } => 4.0 * PI * radius * radius,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Point3<f64> {
        match *self {
            Patch::Rect { axis, value, half } => {
                let a = rng.random_range(-half[0]..=half[0]);
                let b = rng.random_range(-half[1]..=half[1]);
                let mut p = [0.0; 3];
                p[axis] = value;
                p[(axis + 1) % 3] = a;
                p[(axis + 2) % 3] = b;
                Point3::new(p[0], p[1], p[2])
            }
            Patch::Side { radius, z0, z1 } => {
                let t = rng.random_range(0.0..2.0 * PI);
                Point3::new(radius * t.cos(), radius * t.sin(), rng.random_range(z0..=z1))
            }
            Patch::Ring { inner, outer, z } => {
                let t = rng.random_range(0.0..2.0 * PI);
                let r = (rng.random_range(inner * inner..=outer * outer)).sqrt();
                Point3::new(r * t.cos(), r * t.sin(), z)
            }
            Patch::Ball { radius } => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let t = rng.random_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).max(0.0).sqrt();
                Point3::new(radius * s * t.cos(), radius * s * t.sin(), radius * z)
            }
        }
    }
}

fn patches(shape: &Shape) -> Vec<Patch> {
    match *shape {
        Shape::Box { x, y, z } => {
            let h = [x / 2.0, y / 2.0, z / 2.0];
            let mut out = Vec::new();
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    out.push(Patch::Rect {
                        axis,
                        value: sign * h[axis],
                        half: [h[(axis + 1) % 3], h[(axis + 2) % 3]],
                    });
                }
            }
            out
        }
        Shape::Can { radius, height } => vec![
            Patch::Side { radius, z0: -height / 2.0, z1: height / 2.0 },
            Patch::Ring { inner: 0.0, outer: radius, z: -height / 2.0 },
            Patch::Ring { inner: 0.0, outer: radius, z: height / 2.0 },
        ],
        Shape::Sphere { radius } => vec![Patch::Ball { radius }],
        Shape::Bottle { radius, height, neck_radius, neck_height } => {
            let z0 = -(height + neck_height) / 2.0;
            let z1 = z0 + height;
            let z2 = z1 + neck_height;
            vec![
                Patch::Side { radius, z0, z1 },
                Patch::Ring { inner: 0.0, outer: radius, z: z0 },
                Patch::Ring { inner: neck_radius, outer: radius, z: z1 },
                Patch::Side { radius: neck_radius, z0: z1, z1: z2 },
                Patch::Ring { inner: 0.0, outer: neck_radius, z: z2 },
            ]
        }
    }
}

/// Uniform surface samples of the shape, bounding box centered at the origin.
pub fn make_object(spec: &ShapeSpec) -> Result<Cloud<f64>> {
    spec.validate()?;
    let parts = patches(&spec.shape);
    let areas: Vec<f64> = parts.iter().map(Patch::area).collect();
    let total: f64 = areas.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pts = (0..spec.points)
        .map(|_| {
            let mut pick = rng.random_range(0.0..total);
            let mut k = 0;
            while k + 1 < parts.len() && pick >= areas[k] {
                pick -= areas[k];
                k += 1;
            }
            parts[k].sample(&mut rng)
        })
        .collect();
    Cloud::new(pts)
}
