use super::dist2;
use crate::scalar::Real;
use nalgebra::Point3;

/// Greedy farthest-point sampling seeded from index `start`.
///
/// Returns `k` distinct indices (fewer if the cloud is smaller); ties in the
/// running max-min distance resolve to the lowest index.
pub fn farthest_point_sampling<T: Real>(points: &[Point3<T>], k: usize, start: usize) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_d = vec![T::max_value().unwrap_or_else(|| T::lit(f64::MAX)); n];
    let mut cur = start.min(n - 1);
    for _ in 0..k {
        chosen.push(cur);
        taken[cur] = true;
        let c = points[cur];
        let mut next = usize::MAX;
        let mut next_d = -T::one();
        for i in 0..n {
            let d = dist2(&points[i], &c);
            if d < min_d[i] {
                min_d[i] = d;
            }
            if !taken[i] && min_d[i] > next_d {
                next_d = min_d[i];
                next = i;
            }
        }
        if next == usize::MAX {
            break;
        }
        cur = next;
    }
    chosen
}
