//! Point-splat rasterization of masks and depth, and Gaussian keypoint heatmaps.

use crate::error::Result;
use crate::geom::Cloud;
use crate::hand::KeypointHeatmaps;
use crate::losses::{Mask, MaskKind};
use crate::CameraIntrinsics;
use nalgebra::Point3;

/// Depth stored away from a heatmap's bump.
pub const FAR_DEPTH: f64 = 10.0;

/// Per-pixel nearest depth of disk splats (`f64::INFINITY` where empty).
pub fn splat_depth(points: &[Point3<f64>], k: &CameraIntrinsics, radius: f64) -> Result<Vec<f64>> {
    let (w, h) = (k.width, k.height);
    let mut z = vec![f64::INFINITY; w * h];
    let uv = k.project_all(points)?;
    let r2 = radius * radius;
    let reach = radius.floor() as i64;
    for (p, q) in points.iter().zip(&uv) {
        let (cu, cv) = (q.x.round() as i64, q.y.round() as i64);
        for dv in -reach..=reach {
            for du in -reach..=reach {
                if (du * du + dv * dv) as f64 > r2 {
                    continue;
                }
                let (u, v) = (cu + du, cv + dv);
                if u < 0 || v < 0 || u >= w as i64 || v >= h as i64 {
                    continue;
                }
                let i = v as usize * w + u as usize;
                if p.z < z[i] {
                    z[i] = p.z;
                }
            }
        }
    }
    Ok(z)
}

/// Amodal mask of the object and the part of it not hidden by a nearer occluder.
pub fn render_masks(
    object: &Cloud<f64>,
    occluder: &Cloud<f64>,
    k: &CameraIntrinsics,
    radius: f64,
    occluder_radius: f64,
) -> Result<(Mask, Mask)> {
    let obj = splat_depth(object.points(), k, radius)?;
    let occ = splat_depth(occluder.points(), k, occluder_radius)?;
    let amodal: Vec<bool> = obj.iter().map(|z| z.is_finite()).collect();
    let visible: Vec<bool> = obj.iter().zip(&occ).map(|(o, c)| o.is_finite() && !(c < o)).collect();
    Ok((
        Mask::from_bools(k.width, k.height, MaskKind::Amodal, &amodal)?,
        Mask::from_bools(k.width, k.height, MaskKind::Visible, &visible)?,
    ))
}

/// One Gaussian bump per point at its projection. Depth inside the bump
/// support (3σ, at least the peak pixel) is the point's z. `sigma = 0` gives
/// a single-pixel spike.
pub fn make_heatmaps(points: &[Point3<f64>], k: &CameraIntrinsics, sigma: f64) -> Result<KeypointHeatmaps> {
    let (w, h) = (k.width, k.height);
    let n = w * h;
    let uv = k.project_all(points)?;
    let mut act = vec![0.0; points.len() * n];
    let mut depth = vec![FAR_DEPTH; points.len() * n];
    for (c, (p, q)) in points.iter().zip(&uv).enumerate() {
        let peak = (
            (q.x.round().max(0.0) as usize).min(w - 1),
            (q.y.round().max(0.0) as usize).min(h - 1),
        );
        for row in 0..h {
            for col in 0..w {
                let i = c * n + row * w + col;
                if (col, row) == peak {
                    act[i] = if sigma > 0.0 {
                        (-((col as f64 - q.x).powi(2) + (row as f64 - q.y).powi(2)) / (2.0 * sigma * sigma)).exp()
                    } else {
                        1.0
                    };
                    depth[i] = p.z;
                    continue;
                }
                if sigma <= 0.0 {
                    continue;
                }
                let d2 = (col as f64 - q.x).powi(2) + (row as f64 - q.y).powi(2);
                if d2 <= 9.0 * sigma * sigma {
                    act[i] = (-d2 / (2.0 * sigma * sigma)).exp();
                    depth[i] = p.z;
                }
            }
        }
    }
    KeypointHeatmaps::new(points.len(), h, w, act, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::keypoints_from_heatmaps;
    use crate::losses::occlusion_rate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(480.0, 480.0, 128.0, 128.0, 256, 256).unwrap()
    }

    #[test]
    fn single_point_splat_matches_disk_count() {
        let p = Cloud::from_slices(&[[0.0, 0.0, 0.5]]).unwrap();
        for r in [1.0, 2.0, 3.5] {
            let (amodal, visible) = render_masks(&p, &Cloud::empty(), &cam(), r, r).unwrap();
            let reach = r.floor() as i64;
            let mut count = 0;
            for a in -reach..=reach {
                for b in -reach..=reach {
                    if ((a * a + b * b) as f64) <= r * r {
                        count += 1;
                    }
                }
            }
            assert_eq!(amodal.area(), count);
            assert_eq!(visible, Mask::new(256, 256, MaskKind::Visible, amodal.data().to_vec()).unwrap());
            assert_eq!(occlusion_rate(&visible, &amodal).unwrap(), 0.0);
        }
    }

    #[test]
    fn nearer_covering_occluder_hides_everything() {
        let obj = Cloud::from_slices(&[[0.0, 0.0, 0.5], [0.002, 0.0, 0.5]]).unwrap();
        let occ = Cloud::from_slices(&[[0.001, 0.0, 0.3]]).unwrap();
        let (amodal, visible) = render_masks(&obj, &occ, &cam(), 2.0, 12.0).unwrap();
        assert_eq!(visible.area(), 0);
        let a = amodal.area() as f64;
        assert!((occlusion_rate(&visible, &amodal).unwrap() - (1.0 - 1.0 / (a + 1.0))).abs() < 1e-15);
        // the same occluder behind the object hides nothing
        let behind = Cloud::from_slices(&[[0.0015, 0.0, 0.8]]).unwrap();
        let (_, vis2) = render_masks(&obj, &behind, &cam(), 2.0, 12.0).unwrap();
        assert_eq!(vis2.area(), amodal.area());
    }

    #[test]
    fn visible_is_subset_of_amodal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = |n: usize, z: f64| {
            Cloud::new((0..n).map(|_| Point3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), z + rng.random_range(-0.02..0.02))).collect()).unwrap()
        };
        let obj = pts(300, 0.5);
        let occ = pts(100, 0.48);
        let (amodal, visible) = render_masks(&obj, &occ, &cam(), 2.0, 4.0).unwrap();
        assert!(visible.is_subset_of(&amodal));
        assert!(visible.area() < amodal.area());
    }

    #[test]
    fn heatmap_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = cam();
        let joints: Vec<_> = (0..21)
            .map(|_| Point3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(0.4..0.6)))
            .collect();
        for sigma in [0.0, 1.0, 2.5] {
            let maps = make_heatmaps(&joints, &k, sigma).unwrap();
            let rec = keypoints_from_heatmaps(&maps, &k).unwrap();
            for (j, r) in joints.iter().zip(&rec) {
                let (a, b) = (k.project(j).unwrap(), k.project(r).unwrap());
                assert!((a - b).norm() <= 1.0);
                assert!((j.z - r.z).abs() < 1e-9);
            }
            if sigma == 0.0 {
                let plane = &maps.activation()[..256 * 256];
                assert_eq!(plane.iter().filter(|&&a| a > 0.0).count(), 1);
            }
        }
    }
}
