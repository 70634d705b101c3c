use super::Cloud;
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, Vector3};

/// `p ↦ scale · rotation · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T: Real> {
    rotation: Matrix3<T>,
    translation: Vector3<T>,
    scale: T,
}

impl<T: Real> Default for Similarity<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Similarity<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: T::one(),
        }
    }

    /// Validates orthonormality and `det = +1` to a tolerance suited to `T`.
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>, scale: T) -> Result<Self> {
        let tol = T::default_epsilon().sqrt() * T::lit(0.01);
        let tol = if tol > T::lit(1e-9) { tol } else { T::lit(1e-9) };
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det_err = (rotation.determinant() - T::one()).abs();
        if !(ortho_err <= tol && det_err <= tol) {
            return Err(Error::precondition(format!(
                "rotation not orthonormal (|RᵀR - I| = {ortho_err}, |det - 1| = {det_err})"
            )));
        }
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::precondition(format!("scale must be positive, got {scale}")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn from_rotation(rotation: Rotation3<T>) -> Self {
        Self {
            rotation: rotation.into_inner(),
            ..Self::identity()
        }
    }

    pub fn from_parts(rotation: Rotation3<T>, translation: Vector3<T>, scale: T) -> Result<Self> {
        Self::new(rotation.into_inner(), translation, scale)
    }

    pub fn rotation(&self) -> &Matrix3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.rotation * p.coords * self.scale + self.translation)
    }

    pub fn apply(&self, cloud: &Cloud<T>) -> Cloud<T> {
        let pts = cloud.points().iter().map(|p| self.apply_point(p)).collect();
        let out = Cloud::from_points_unchecked(pts);
        match cloud.labels() {
            Some(l) => out.with_labels(l.to_vec()).expect("same length"),
            None => out,
        }
    }

    /// `self ∘ other`: applying the result equals applying `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let inv_s = T::one() / self.scale;
        Self {
            rotation: rt,
            translation: -(rt * self.translation) * inv_s,
            scale: inv_s,
        }
    }

    /// 4×4 homogeneous matrix with the scale folded into the upper-left block.
    pub fn to_homogeneous(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.rotation * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Inverse of [`Similarity::to_homogeneous`]; the scale is recovered as the
    /// cube root of the block determinant.
    pub fn from_homogeneous(m: &Matrix4<T>) -> Result<Self> {
        let block: Matrix3<T> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let det = block.determinant();
        if !(det > T::zero()) {
            return Err(Error::precondition("homogeneous block has non-positive determinant"));
        }
        let scale = det.cbrt();
        let rotation = block / scale;
        // re-orthonormalize away storage rounding
        let svd = rotation.svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        Self::new(u * vt, m.fixed_view::<3, 1>(0, 3).into_owned(), scale)
    }

    /// Rotation angle (radians) of `self.rotation · other.rotationᵀ`.
    pub fn rotation_angle_to(&self, other: &Self) -> T {
        let r = self.rotation * other.rotation.transpose();
        let c = (r.trace() - T::one()) * T::lit(0.5);
        let c = c.clamp(-T::one(), T::one());
        c.acos()
    }
}
