use crate::error::{Error, Result};
use crate::geom::{Cloud, Similarity};
use crate::scalar::Real;
use nalgebra::{Matrix3, Vector3};

/// Closed-form least-squares similarity mapping `src[a]` onto `dst[b]` for every
/// pair `(a, b)`, via SVD of the cross-covariance. Reflections are excluded.
///
/// With `estimate_scale = false` the scale is fixed at 1 (a rigid fit).
pub fn best_fit_similarity<T: Real>(
    src: &Cloud<T>,
    dst: &Cloud<T>,
    pairs: &[(usize, usize)],
    estimate_scale: bool,
) -> Result<Similarity<T>> {
    if pairs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "similarity fit needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    let (sp, dp) = (src.points(), dst.points());
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= sp.len() || b >= dp.len()) {
        return Err(Error::precondition(format!("pair ({a}, {b}) out of range")));
    }
    let n = T::from_usize_lossy(pairs.len());
    let mut mu_s = Vector3::zeros();
    let mut mu_d = Vector3::zeros();
    for &(a, b) in pairs {
        mu_s += sp[a].coords;
        mu_d += dp[b].coords;
    }
    mu_s /= n;
    mu_d /= n;

    let mut cov = Matrix3::zeros();
    let mut var_s = T::zero();
    for &(a, b) in pairs {
        let xs = sp[a].coords - mu_s;
        let xd = dp[b].coords - mu_d;
        cov += xd * xs.transpose();
        var_s += xs.norm_squared();
    }
    cov /= n;
    var_s /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("cross-covariance SVD did not converge".into())),
    };
    // nalgebra sorts singular values in descending order
    let sv = svd.singular_values;
    let tol = T::default_epsilon().sqrt() * sv[0];
    if !(sv[0] > T::zero()) || sv[1] <= tol || var_s <= T::zero() {
        return Err(Error::Degenerate(format!(
            "rank-deficient cross-covariance (singular values {}, {}, {})",
            sv[0], sv[1], sv[2]
        )));
    }
    let mut d = Vector3::repeat(T::one());
    if (u.determinant() * v_t.determinant()) < T::zero() {
        d[2] = -T::one();
    }
    let rotation = u * Matrix3::from_diagonal(&d) * v_t;
    let scale = if estimate_scale {
        (sv[0] * d[0] + sv[1] * d[1] + sv[2] * d[2]) / var_s
    } else {
        T::one()
    };
    if !(scale > T::zero()) {
        return Err(Error::Degenerate(format!("non-positive fitted scale {scale}")));
    }
    let translation = mu_d - rotation * mu_s * scale;
    Similarity::new(rotation, translation, scale)
}
