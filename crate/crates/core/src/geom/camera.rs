use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{Point2, Point3};

/// Pinhole intrinsics. Pixel coordinates follow `u = fx·x/z + cx`, `v = fy·y/z + cy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> Intrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        let w = T::from_usize_lossy(width);
        let h = T::from_usize_lossy(height);
        let ok = fx > T::zero()
            && fy > T::zero()
            && cx >= T::zero()
            && cx < w
            && cy >= T::zero()
            && cy < h
            && fx.is_finite()
            && fy.is_finite();
        if !ok {
            return Err(Error::precondition(format!(
                "invalid intrinsics fx={fx} fy={fy} cx={cx} cy={cy} size={width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn project(&self, x: &Point3<T>) -> Result<Point2<T>> {
        if !(x.z > T::zero()) {
            return Err(Error::BehindCamera {
                index: 0,
                z: x.z.to_f64_lossy(),
            });
        }
        Ok(self.project_unchecked(x))
    }

    #[inline]
    pub(crate) fn project_unchecked(&self, x: &Point3<T>) -> Point2<T> {
        Point2::new(self.fx * x.x / x.z + self.cx, self.fy * x.y / x.z + self.cy)
    }

    /// Projects every point, reporting the first one behind the camera.
    pub fn project_all(&self, pts: &[Point3<T>]) -> Result<Vec<Point2<T>>> {
        pts.iter()
            .enumerate()
            .map(|(index, p)| {
                if p.z > T::zero() {
                    Ok(self.project_unchecked(p))
                } else {
                    Err(Error::BehindCamera {
                        index,
                        z: p.z.to_f64_lossy(),
                    })
                }
            })
            .collect()
    }

    pub fn unproject(&self, u: T, v: T, depth: T) -> Result<Point3<T>> {
        if !(depth > T::zero()) {
            return Err(Error::precondition(format!("unproject with depth {depth}")));
        }
        Ok(Point3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        ))
    }

    /// Intrinsics of the same camera on a raster resampled by `factor`
    /// (e.g. 0.25 for a quarter-resolution heatmap).
    pub fn rescaled(&self, factor: T, width: usize, height: usize) -> Result<Self> {
        Self::new(
            self.fx * factor,
            self.fy * factor,
            self.cx * factor,
            self.cy * factor,
            width,
            height,
        )
    }

    pub fn contains(&self, uv: &Point2<T>) -> bool {
        uv.x >= T::zero()
            && uv.y >= T::zero()
            && uv.x < T::from_usize_lossy(self.width)
            && uv.y < T::from_usize_lossy(self.height)
    }
}
