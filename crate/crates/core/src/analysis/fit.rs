//! Least-squares fits: the parabolic optimum of a squeezing curve, power laws
//! in log-log space and the `2 theta` sinusoid of a theta scan.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{to_db, wrap_half_turn, SqueezingRecord};

/// Default half-width (in grid points) of the parabolic window.
pub const DEFAULT_FIT_WINDOW: usize = 2;

/// `y = c0 + c1 x + c2 x^2`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parabola {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Parabola {
    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    pub fn vertex(&self) -> f64 {
        -self.c1 / (2.0 * self.c2)
    }
}

/// Least-squares parabola, solved in coordinates centered on the data.
pub fn fit_parabola(x: &[f64], y: &[f64]) -> Result<Parabola> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::InvalidParameter("parabola needs three points".into()));
    }
    let n = x.len() as f64;
    let x0 = x.iter().sum::<f64>() / n;
    let scale = x.iter().map(|v| (v - x0).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let u = (xi - x0) / scale;
        let row = Vector3::new(1.0, u, u * u);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let c = ata.lu().solve(&aty).ok_or_else(|| Error::InvalidParameter("degenerate abscissae".into()))?;
    // back to the original coordinate
    let (a, b, q) = (c[0], c[1] / scale, c[2] / (scale * scale));
    Ok(Parabola { c0: a - b * x0 + q * x0 * x0, c1: b - 2.0 * q * x0, c2: q })
}

/// Optimum of a squeezing curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub xi2: f64,
    pub xi2_db: f64,
    pub t_us: f64,
    /// Index of the grid minimum.
    pub grid_index: usize,
    /// The parabola was unusable and the grid minimum is reported instead.
    pub fallback: bool,
}

/// Optimum of `(t, xi2)` points from a parabola fitted to `xi2` in dB over the
/// grid minimum `+- window` points. Non-finite points are skipped.
pub fn extract_optimum_points(points: &[(f64, f64)], window: usize) -> Result<Optimum> {
    let pts: Vec<(usize, f64, f64)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.0.is_finite() && p.1.is_finite() && p.1 > 0.0)
        .map(|(i, &(t, v))| (i, t, to_db(v)))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InvalidParameter(format!("need at least 5 finite points, got {}", pts.len())));
    }
    if pts.windows(2).any(|w| w[1].1 <= w[0].1) {
        return Err(Error::InvalidParameter("times must increase".into()));
    }
    let imin = (0..pts.len()).min_by(|&a, &b| pts[a].2.total_cmp(&pts[b].2)).expect("nonempty");
    if imin == 0 || imin == pts.len() - 1 {
        return Err(Error::NoInteriorMinimum);
    }
    let lo = imin.saturating_sub(window.max(1));
    let hi = (imin + window.max(1)).min(pts.len() - 1);
    let xs: Vec<f64> = pts[lo..=hi].iter().map(|p| p.1).collect();
    let ys: Vec<f64> = pts[lo..=hi].iter().map(|p| p.2).collect();
    let grid = Optimum {
        xi2: 10f64.powf(pts[imin].2 / 10.0),
        xi2_db: pts[imin].2,
        t_us: pts[imin].1,
        grid_index: pts[imin].0,
        fallback: true,
    };
    let Ok(p) = fit_parabola(&xs, &ys) else { return Ok(grid) };
    let tv = p.vertex();
    if !(p.c2 > 0.0) || !(tv >= xs[0] && tv <= xs[xs.len() - 1]) {
        return Ok(grid);
    }
    let db = p.eval(tv);
    Ok(Optimum { xi2: 10f64.powf(db / 10.0), xi2_db: db, t_us: tv, grid_index: pts[imin].0, fallback: false })
}

/// [`extract_optimum_points`] over squeezing records.
pub fn extract_optimum(records: &[SqueezingRecord], window: usize) -> Result<Optimum> {
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.t_us, r.xi2)).collect();
    extract_optimum_points(&pts, window)
}

/// `y = prefactor * x^exponent`, fitted as a line in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub exponent: f64,
    /// Standard error from the residuals; NaN with only two points.
    pub se_exponent: f64,
    pub prefactor: f64,
    pub n_points: usize,
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLaw> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("power law needs two or more positive points".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("power law needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let se = if lx.len() > 2 {
        let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(PowerLaw { exponent: slope, se_exponent: se, prefactor: icpt.exp(), n_points: lx.len() })
}

/// `V(theta) = offset + amplitude cos(2 (theta - theta_min) - pi)`; the
/// minimum sits at `theta_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub theta_min: f64,
    pub se_amplitude: f64,
    pub se_theta: f64,
    /// Amplitude not resolved above twice its error; `theta_min` is arbitrary.
    pub degenerate: bool,
}

impl SinusoidFit {
    pub fn eval(&self, theta: f64) -> f64 {
        self.offset - self.amplitude * (2.0 * (theta - self.theta_min)).cos()
    }

    pub fn min_value(&self) -> f64 {
        self.offset - self.amplitude
    }
}

/// Linear least squares on `[1, cos 2 theta, sin 2 theta]`.
pub fn fit_sinusoid(theta: &[f64], values: &[f64]) -> Result<SinusoidFit> {
    if theta.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), got: values.len() });
    }
    if theta.len() < 4 {
        return Err(Error::InvalidParameter("theta scan needs at least 4 points".into()));
    }
    let m = theta.len();
    let a = DMatrix::from_fn(m, 3, |r, c| match c {
        0 => 1.0,
        1 => (2.0 * theta[r]).cos(),
        _ => (2.0 * theta[r]).sin(),
    });
    let y = DVector::from_column_slice(values);
    let ata = a.transpose() * &a;
    let inv = ata
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("theta grid does not resolve 2 theta".into()))?;
    let p = &inv * (a.transpose() * &y);
    let (a0, b, c) = (p[0], p[1], p[2]);
    let resid = &y - &a * &p;
    let s2 = if m > 3 { resid.norm_squared() / (m - 3) as f64 } else { 0.0 };
    let cov = inv * s2;
    let r = b.hypot(c);
    let (se_r, se_theta) = if r > 0.0 {
        let (gb, gc) = (b / r, c / r);
        let var_r = gb * gb * cov[(1, 1)] + gc * gc * cov[(2, 2)] + 2.0 * gb * gc * cov[(1, 2)];
        // theta = atan2(c, b)/2 + pi/2
        let (tb, tc) = (-c / (2.0 * r * r), b / (2.0 * r * r));
        let var_t = tb * tb * cov[(1, 1)] + tc * tc * cov[(2, 2)] + 2.0 * tb * tc * cov[(1, 2)];
        (var_r.max(0.0).sqrt(), var_t.max(0.0).sqrt())
    } else {
        (cov[(1, 1)].max(0.0).sqrt(), f64::INFINITY)
    };
    let degenerate = r <= 1e-12 * a0.abs().max(1.0) || r <= 2.0 * se_r;
    let theta_min = if r > 0.0 { wrap_half_turn(0.5 * c.atan2(b) + std::f64::consts::FRAC_PI_2) } else { 0.0 };
    Ok(SinusoidFit { offset: a0, amplitude: r, theta_min, se_amplitude: se_r, se_theta, degenerate })
}

/// Evenly spaced grid of `n` angles covering `[-pi/2, pi/2)`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    use std::f64::consts::{FRAC_PI_2, PI};
    (0..n).map(|k| -FRAC_PI_2 + PI * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{theta_star, var_along, MomentSummary};
    use proptest::prelude::*;

    #[test]
    fn exact_parabola_vertex() {
        let t: Vec<f64> = (0..9).map(|k| 0.05 * k as f64).collect();
        // xi2 in dB is an exact parabola with vertex at 0.23 us, -4 dB
        let pts: Vec<(f64, f64)> =
            t.iter().map(|&x| (x, 10f64.powf((-4.0 + 30.0 * (x - 0.23).powi(2)) / 10.0))).collect();
        let o = extract_optimum_points(&pts, 2).unwrap();
        assert!(!o.fallback);
        assert!((o.t_us - 0.23).abs() < 1e-10 && (o.xi2_db + 4.0).abs() < 1e-10);
    }

    #[test]
    fn symmetric_v_shape() {
        let pts: Vec<(f64, f64)> =
            (0..7).map(|k| (k as f64, 10f64.powf(-(3.0 - (k as f64 - 3.0).abs()) / 10.0))).collect();
        let o = extract_optimum_points(&pts, 2).unwrap();
        assert!((o.t_us - 3.0).abs() < 1e-12);
    }

    #[test]
    fn edge_minimum_is_an_error() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 1.0 - 0.1 * k as f64)).collect();
        assert!(matches!(extract_optimum_points(&pts, 2), Err(Error::NoInteriorMinimum)));
        assert!(extract_optimum_points(&pts[..4], 2).is_err());
    }

    #[test]
    fn vertex_outside_window_falls_back() {
        // a sharp dip next to a slope whose best parabola turns outside the window
        let ys = [0.0, -1.0, -2.0, -3.0, -10.0, -3.5, -3.6, -3.7];
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(k, &db)| (k as f64, 10f64.powf(db / 10.0))).collect();
        let o = extract_optimum_points(&pts, 1).unwrap();
        assert_eq!(o.grid_index, 4);
        if o.fallback {
            assert_eq!(o.t_us, 4.0);
        } else {
            assert!((3.0..=5.0).contains(&o.t_us));
        }
    }

    #[test]
    fn exact_power_law() {
        let n = [8.0, 16.0, 32.0, 64.0, 128.0];
        let y: Vec<f64> = n.iter().map(|v: &f64| 1.7 * v.powf(-2.0 / 3.0)).collect();
        let p = fit_power_law(&n, &y).unwrap();
        assert!((p.exponent + 2.0 / 3.0).abs() < 1e-10);
        assert!((p.prefactor - 1.7).abs() < 1e-9);
        assert!(p.se_exponent < 1e-10);
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn power_law_error_matches_textbook_formula() {
        // oracle: slope standard error sqrt(RSS/(n-2)/Sxx) computed by hand
        let x = [1.0f64, 2.0, 4.0, 8.0];
        let y = [1.0f64, 2.2, 3.9, 8.5];
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let mx = lx.iter().sum::<f64>() / 4.0;
        let my = ly.iter().sum::<f64>() / 4.0;
        let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
        let b = lx.iter().zip(&ly).map(|(a, c)| (a - mx) * (c - my)).sum::<f64>() / sxx;
        let a = my - b * mx;
        let rss: f64 = lx.iter().zip(&ly).map(|(u, v)| (v - a - b * u).powi(2)).sum();
        let p = fit_power_law(&x, &y).unwrap();
        assert!((p.se_exponent - (rss / 2.0 / sxx).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_recovers_theta_star() {
        let m = MomentSummary { mean_x: 0.0, mean_y: 4.0, mean_z: 0.0, var_x: 5.0, var_z: 1.2, cov_xz: 1.1 };
        let th = theta_grid(16);
        let v: Vec<f64> = th.iter().map(|&t| var_along(&m, t)).collect();
        let f = fit_sinusoid(&th, &v).unwrap();
        let ts = theta_star(&m);
        assert!((f.theta_min - ts.theta).abs() < 1e-10);
        assert!((f.min_value() - ts.min_var).abs() < 1e-10);
        assert!(!f.degenerate);
    }

    #[test]
    fn flat_scan_is_degenerate() {
        let th = theta_grid(16);
        let f = fit_sinusoid(&th, &[4.0; 16]).unwrap();
        assert!(f.degenerate);
        assert!((f.offset - 4.0).abs() < 1e-12);
        assert!(fit_sinusoid(&th[..3], &[1.0; 3]).is_err());
    }

    #[test]
    fn grid_covers_half_turn() {
        let g = theta_grid(16);
        assert_eq!(g.len(), 16);
        assert!((g[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(g[15] < std::f64::consts::FRAC_PI_2);
    }

    proptest! {
        #[test]
        fn parabola_fit_is_exact(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in 0.1f64..50.0, x0 in -2.0f64..2.0) {
            let x: Vec<f64> = (0..7).map(|k| x0 + 0.1 * k as f64).collect();
            let y: Vec<f64> = x.iter().map(|&v| c0 + c1 * v + c2 * v * v).collect();
            let p = fit_parabola(&x, &y).unwrap();
            prop_assert!((p.c2 - c2).abs() < 1e-6 * c2.max(1.0));
            prop_assert!((p.c1 - c1).abs() < 1e-6 * (c1.abs() + c2).max(1.0));
        }
    }
}
