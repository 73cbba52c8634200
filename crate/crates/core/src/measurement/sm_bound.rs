//! Minimal collective variance at fixed mean spin for `k`-particle
//! entanglement (Sorensen-Molmer bound).
//!
//! Computed on a single spin `j = k/2`: for a multiplier `lambda` minimize
//! `<(J_z - mu)^2> - lambda <J_x>` over states and the shift `mu`. The
//! polarization axis here is `x`; callers compare it to `|<J_y>|`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_SM_K: usize = 64;

/// Points `(2<J>/k, 4 Var/k)` sorted by mean-spin fraction, ending at `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmCurve {
    pub k: usize,
    pub points: Vec<[f64; 2]>,
}

impl SmCurve {
    /// Bound on `4 Var/N` at mean-spin fraction `x`, linearly interpolated.
    pub fn min_variance_at(&self, x: f64) -> Option<f64> {
        let p = &self.points;
        if x < p[0][0] || x > p[p.len() - 1][0] {
            return None;
        }
        let i = p.partition_point(|q| q[0] < x);
        if i == 0 {
            return Some(p[0][1]);
        }
        let (a, b) = (p[i - 1], p[i]);
        let s = if b[0] > a[0] { (x - a[0]) / (b[0] - a[0]) } else { 0.0 };
        Some(a[1] + s * (b[1] - a[1]))
    }

    /// A point strictly below the curve needs entanglement depth above `k`.
    pub fn is_below(&self, x: f64, v: f64) -> bool {
        self.min_variance_at(x).is_some_and(|b| v < b)
    }
}

struct SpinMatrices {
    jz: DMatrix<f64>,
    jx: DMatrix<f64>,
}

fn spin_matrices(k: usize) -> SpinMatrices {
    let j = k as f64 / 2.0;
    let d = k + 1;
    let m = |a: usize| a as f64 - j;
    let jz = DMatrix::from_fn(d, d, |r, c| if r == c { m(r) } else { 0.0 });
    let jx = DMatrix::from_fn(d, d, |r, c| {
        if r == c + 1 {
            0.5 * (j * (j + 1.0) - m(c) * (m(c) + 1.0)).sqrt()
        } else if c == r + 1 {
            0.5 * (j * (j + 1.0) - m(r) * (m(r) + 1.0)).sqrt()
        } else {
            0.0
        }
    });
    SpinMatrices { jz, jx }
}

/// Ground state of `(J_z - mu)^2 - lambda J_x`: energy and `(<J_x>, Var J_z)`.
fn ground(s: &SpinMatrices, lambda: f64, mu: f64) -> (f64, f64, f64) {
    let d = s.jz.nrows();
    let shifted = &s.jz - DMatrix::identity(d, d) * mu;
    let h = &shifted * &shifted - &s.jx * lambda;
    let eig = SymmetricEigen::new(h);
    let (imin, e) =
        eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &e)| if e < b.1 { (i, e) } else { b });
    let g = eig.eigenvectors.column(imin);
    let jx = (g.transpose() * &s.jx * g)[(0, 0)];
    let jz = (g.transpose() * &s.jz * g)[(0, 0)];
    let jz2 = (g.transpose() * &s.jz * &s.jz * g)[(0, 0)];
    (e, jx.abs(), (jz2 - jz * jz).max(0.0))
}

/// Optimal shift by a coarse scan of `[0, j]` then golden-section refinement.
/// The energy is even in `mu`.
fn best_mu(s: &SpinMatrices, lambda: f64, j: f64) -> f64 {
    const SCAN: usize = 24;
    let energy = |mu: f64| ground(s, lambda, mu).0;
    let grid: Vec<f64> = (0..=SCAN).map(|i| j * i as f64 / SCAN as f64).collect();
    let ibest = (0..=SCAN).min_by(|&a, &b| energy(grid[a]).total_cmp(&energy(grid[b]))).unwrap_or(0);
    let (mut a, mut b) = (grid[ibest.saturating_sub(1)], grid[(ibest + 1).min(SCAN)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (energy(c), energy(d));
    while b - a > 1e-10 * j.max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = energy(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = energy(d);
        }
    }
    0.5 * (a + b)
}

/// Bound curve for entanglement depth `k` traced by `n_points` multipliers.
pub fn sm_depth_bound(k: usize, n_points: usize) -> Result<SmCurve> {
    if k == 0 || k > MAX_SM_K {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={MAX_SM_K}")));
    }
    if n_points < 2 {
        return Err(Error::InvalidParameter("need at least two curve points".into()));
    }
    let s = spin_matrices(k);
    let j = k as f64 / 2.0;
    // log-spaced multipliers cover the approach to the coherent state at
    // large j; a linear set resolves small j, which saturates at lambda ~ 1
    let (lo, hi) = (1e-4, 1e4 * j.max(1.0));
    let step = 1.0 / (n_points - 1) as f64;
    let lambdas =
        (0..n_points).map(|i| lo * (hi / lo).powf(i as f64 * step)).chain((1..n_points).map(|i| 2.0 * i as f64 * step));
    let mut points: Vec<[f64; 2]> = lambdas
        .map(|lambda| {
            let mu = best_mu(&s, lambda, j);
            let (_, jx, var) = ground(&s, lambda, mu);
            [jx / j, 4.0 * var / k as f64]
        })
        .filter(|p| p[0] < 1.0 - 1e-12)
        .collect();
    points.push([1.0, 1.0]);
    points.sort_by(|a, b| a[0].total_cmp(&b[0]));
    points.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-14);
    Ok(SmCurve { k, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spin_is_the_sql_boundary() {
        let c = sm_depth_bound(1, 60).unwrap();
        for p in &c.points {
            assert!((p[1] - p[0] * p[0]).abs() < 1e-6, "{p:?}");
        }
        assert!(c.points[0][0] < 0.05);
    }

    #[test]
    fn coherent_endpoint() {
        for k in [1, 2, 5, 20] {
            let c = sm_depth_bound(k, 40).unwrap();
            let last = c.points[c.points.len() - 1];
            assert_eq!(last, [1.0, 1.0]);
            let prev = c.points[c.points.len() - 2];
            assert!(prev[0] > 0.95 && (prev[1] - 1.0).abs() < 0.1, "k={k}");
        }
    }

    #[test]
    fn deeper_entanglement_allows_lower_variance() {
        let c3 = sm_depth_bound(3, 80).unwrap();
        let c36 = sm_depth_bound(36, 80).unwrap();
        for i in 1..100 {
            let x = i as f64 / 100.0;
            if let (Some(a), Some(b)) = (c36.min_variance_at(x), c3.min_variance_at(x)) {
                assert!(a <= b + 1e-9, "x = {x}: {a} > {b}");
            }
        }
        // the bounds genuinely differ in the squeezed region
        assert!(c36.min_variance_at(0.9).unwrap() < c3.min_variance_at(0.9).unwrap() - 0.05);
    }

    #[test]
    fn curve_sits_below_sql() {
        let c = sm_depth_bound(4, 60).unwrap();
        for p in &c.points {
            assert!(p[1] <= p[0] * p[0] + 1e-9);
        }
        assert!(c.is_below(0.9, 0.3));
        assert!(!c.is_below(0.9, 0.95));
    }

    #[test]
    fn rejects_bad_k() {
        assert!(sm_depth_bound(0, 10).is_err());
        assert!(sm_depth_bound(65, 10).is_err());
    }
}
