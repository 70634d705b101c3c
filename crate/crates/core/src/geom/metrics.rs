use super::{Cloud, KdTree};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mean squared nearest-neighbor distance from every point of `from` into `to`.
fn directed_mean_sq<T: Real>(from: &Cloud<T>, to: &KdTree<T>) -> T {
    let mut acc = T::zero();
    for p in from.points() {
        acc += to.nearest_unchecked(p).1;
    }
    acc / T::from_usize_lossy(from.len())
}

/// Symmetric Chamfer distance on squared distances, summing both directional means
/// (no ½ factor). Units are the input units squared.
pub fn chamfer<T: Real>(p: &Cloud<T>, q: &Cloud<T>) -> Result<T> {
    p.require_non_empty("chamfer")?;
    q.require_non_empty("chamfer")?;
    let tp = KdTree::build(p)?;
    let tq = KdTree::build(q)?;
    Ok(directed_mean_sq(p, &tq) + directed_mean_sq(q, &tp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall<T> {
    /// Fraction of predicted points within `tau` of the reference.
    pub precision: T,
    /// Fraction of reference points within `tau` of the prediction.
    pub recall: T,
}

impl<T: Real> PrecisionRecall<T> {
    pub fn f_score(&self) -> T {
        let s = self.precision + self.recall;
        if s == T::zero() {
            T::zero()
        } else {
            T::lit(2.0) * self.precision * self.recall / s
        }
    }
}

fn fraction_within<T: Real>(from: &Cloud<T>, to: &KdTree<T>, tau2: T) -> T {
    let hits = from
        .points()
        .iter()
        .filter(|p| to.nearest_unchecked(p).1 <= tau2)
        .count();
    T::from_usize_lossy(hits) / T::from_usize_lossy(from.len())
}

/// Precision of `pred` against `reference` and recall of `reference` by `pred`
/// at threshold `tau` (a point counts when its nearest distance is ≤ `tau`).
pub fn precision_recall<T: Real>(pred: &Cloud<T>, reference: &Cloud<T>, tau: T) -> Result<PrecisionRecall<T>> {
    pred.require_non_empty("f-score")?;
    reference.require_non_empty("f-score")?;
    if !(tau > T::zero()) {
        return Err(Error::precondition(format!("f-score threshold must be positive, got {tau}")));
    }
    let tau2 = tau * tau;
    let tp = KdTree::build(pred)?;
    let tr = KdTree::build(reference)?;
    Ok(PrecisionRecall {
        precision: fraction_within(pred, &tr, tau2),
        recall: fraction_within(reference, &tp, tau2),
    })
}

/// Harmonic mean of precision and recall at `tau`; 0 when both are 0.
pub fn f_score<T: Real>(pred: &Cloud<T>, reference: &Cloud<T>, tau: T) -> Result<T> {
    Ok(precision_recall(pred, reference, tau)?.f_score())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Similarity;
    use nalgebra::{Point3, Rotation3, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Cloud<f64> {
        Cloud::new((0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect()).unwrap()
    }

    fn oracle_chamfer(p: &Cloud<f64>, q: &Cloud<f64>) -> f64 {
        let dir = |a: &Cloud<f64>, b: &Cloud<f64>| {
            let mut s = 0.0;
            for x in a.points() {
                let mut m = f64::INFINITY;
                for y in b.points() {
                    m = m.min((x - y).norm_squared());
                }
                s += m;
            }
            s / a.len() as f64
        };
        dir(p, q) + dir(q, p)
    }

    #[test]
    fn chamfer_basic_cases() {
        let p = Cloud::from_slices(&[[0.0, 0.0, 0.0]]).unwrap();
        let q = Cloud::from_slices(&[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(chamfer(&p, &q).unwrap(), 2.0);
        assert_eq!(chamfer(&p, &p).unwrap(), 0.0);
        assert!(chamfer(&p, &Cloud::empty()).is_err());
    }

    #[test]
    fn chamfer_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_cloud(&mut rng, 500);
        let q = random_cloud(&mut rng, 500);
        let a = chamfer(&p, &q).unwrap();
        let b = oracle_chamfer(&p, &q);
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn f_score_cases() {
        let p = Cloud::from_slices(&[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]).unwrap();
        assert_eq!(f_score(&p, &p, 0.005).unwrap(), 1.0);
        let far = p.translated(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(f_score(&p, &far, 0.005).unwrap(), 0.0);
        let q = Cloud::from_slices(&[[0.0, 0.0, 0.0]]).unwrap();
        let pr = precision_recall(&p, &q, 0.005).unwrap();
        assert_eq!((pr.precision, pr.recall), (0.5, 1.0));
        assert!((pr.f_score() - 2.0f64 / 3.0).abs() < 1e-15);
        assert!(f_score(&p, &q, 0.0).is_err());
        assert!(f_score(&p, &Cloud::empty(), 1.0).is_err());
    }

    #[test]
    fn f32_path_agrees_with_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_cloud(&mut rng, 200);
        let q = random_cloud(&mut rng, 150);
        let a = chamfer(&p, &q).unwrap();
        let b = chamfer(&p.cast::<f32>(), &q.cast::<f32>()).unwrap() as f64;
        assert!((a - b).abs() < 1e-5 * a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn chamfer_symmetric_and_rigid_invariant(seed in any::<u64>(), n in 1usize..200, m in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_cloud(&mut rng, n);
            let q = random_cloud(&mut rng, m);
            let c = chamfer(&p, &q).unwrap();
            prop_assert_eq!(c, chamfer(&q, &p).unwrap());
            prop_assert!(c >= 0.0);
            let a = Similarity::from_parts(
                Rotation3::new(Vector3::new(rng.random(), rng.random(), rng.random())),
                Vector3::new(rng.random(), rng.random(), rng.random()),
                1.0,
            ).unwrap();
            let c2 = chamfer(&a.apply(&p), &a.apply(&q)).unwrap();
            prop_assert!((c - c2).abs() <= 1e-9 * c.max(1e-12));
        }

        #[test]
        fn f_score_monotone_in_tau(seed in any::<u64>(), t1 in 0.01f64..0.5, dt in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_cloud(&mut rng, 60);
            let q = random_cloud(&mut rng, 40);
            prop_assert!(f_score(&p, &q, t1).unwrap() <= f_score(&p, &q, t1 + dt).unwrap());
        }
    }
}
