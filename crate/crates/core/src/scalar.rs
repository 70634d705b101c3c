//! Scalar abstraction shared by the geometric core.
//!
//! Geometry, metrics and registration are written against [`Real`] so the
//! same code runs in `f64` (the default everywhere in the pipeline) and in
//! `f32` (matching on-disk precision).

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display {
    /// Converts an `f64` literal, panicking only for types that cannot hold it.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("scalar conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
