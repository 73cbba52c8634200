//! From states to observables: transverse moments, the optimal squeezing
//! angle, the squeezing parameter, sampled snapshots and their statistics.

mod shots;
mod sm_bound;

pub use shots::{
    bootstrap, sample_shots, sample_shots_biased, shot_squeezing, shot_statistics, Readout, ShotMeta, ShotSet,
    ShotSqueezing, ShotStatistics,
};
pub use sm_bound::{sm_depth_bound, SmCurve, MAX_SM_K};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::operators::{collective_expectations, CollectiveMoments};
use crate::state::StateVector;

/// Mean spin and the transverse (x-z) covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_z: f64,
    pub var_x: f64,
    pub var_z: f64,
    /// `<{J_x, J_z}>/2 - <J_x><J_z>`
    pub cov_xz: f64,
}

impl From<&CollectiveMoments> for MomentSummary {
    fn from(m: &CollectiveMoments) -> Self {
        Self {
            mean_x: m.jx,
            mean_y: m.jy,
            mean_z: m.jz,
            var_x: m.var_x().max(0.0),
            var_z: m.var_z().max(0.0),
            cov_xz: m.cov_xz(),
        }
    }
}

impl MomentSummary {
    /// Summary of a sampled point cloud in the x-z plane.
    pub fn from_points(points: &[[f64; 2]]) -> Self {
        let n = points.len() as f64;
        let (mx, mz) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        let (mx, mz) = (mx / n, mz / n);
        let (mut vx, mut vz, mut c) = (0.0, 0.0, 0.0);
        for p in points {
            let (dx, dz) = (p[0] - mx, p[1] - mz);
            vx += dx * dx;
            vz += dz * dz;
            c += dx * dz;
        }
        let d = (n - 1.0).max(1.0);
        Self { mean_x: mx, mean_y: 0.0, mean_z: mz, var_x: vx / d, var_z: vz / d, cov_xz: c / d }
    }

    pub fn is_valid(&self) -> bool {
        self.var_x >= 0.0 && self.var_z >= 0.0 && self.cov_xz.abs() <= (self.var_x * self.var_z).sqrt() + 1e-12
    }
}

/// `Var(J_theta)` with `J_theta = cos(theta) J_z + sin(theta) J_x`.
pub fn var_along(m: &MomentSummary, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * c * m.var_z + s * s * m.var_x + 2.0 * s * c * m.cov_xz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStar {
    /// Minimizing angle in `(-pi/2, pi/2]`.
    pub theta: f64,
    pub min_var: f64,
    /// The transverse distribution is isotropic; `theta` is set to 0.
    pub degenerate: bool,
}

/// Wrap an angle into `(-pi/2, pi/2]`.
pub fn wrap_half_turn(theta: f64) -> f64 {
    let mut t = theta % PI;
    if t > FRAC_PI_2 {
        t -= PI;
    } else if t <= -FRAC_PI_2 {
        t += PI;
    }
    t
}

/// Closed-form minor axis of the transverse noise ellipse.
///
/// `Var(theta) = A + B cos(2 theta) + C sin(2 theta)` with
/// `A = (vz + vx)/2`, `B = (vz - vx)/2`, `C = cov`; the minimum sits half a
/// turn away from `atan2(C, B)`.
pub fn theta_star(m: &MomentSummary) -> ThetaStar {
    let a = 0.5 * (m.var_z + m.var_x);
    let b = 0.5 * (m.var_z - m.var_x);
    let c = m.cov_xz;
    let r = b.hypot(c);
    if r <= 1e-10 * a.abs() || r == 0.0 {
        return ThetaStar { theta: 0.0, min_var: a - r, degenerate: true };
    }
    let theta = wrap_half_turn(0.5 * c.atan2(b) + FRAC_PI_2);
    ThetaStar { theta, min_var: a - r, degenerate: false }
}

/// One row of a squeezing time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingRecord {
    pub t_us: f64,
    pub n_atoms: usize,
    /// `|<J_y>|`
    pub mean_spin: f64,
    pub theta_star: f64,
    pub min_var: f64,
    pub xi2: f64,
    pub xi2_db: f64,
    /// The mean spin vanished and `xi2` is not meaningful.
    pub collapsed: bool,
}

impl SqueezingRecord {
    /// `xi^2 = N min Var / <J_y>^2` for `n_atoms` atoms.
    pub fn new(t_us: f64, n_atoms: usize, mean_spin: f64, theta_star: f64, min_var: f64) -> Self {
        let half = n_atoms as f64 / 2.0;
        let collapsed = mean_spin * mean_spin < 1e-12 * half * half;
        let xi2 = if collapsed { f64::INFINITY } else { n_atoms as f64 * min_var.max(0.0) / (mean_spin * mean_spin) };
        Self { t_us, n_atoms, mean_spin: mean_spin.abs(), theta_star, min_var, xi2, xi2_db: to_db(xi2), collapsed }
    }

    pub fn from_moments(t_us: f64, n_atoms: usize, m: &MomentSummary) -> Self {
        let ts = theta_star(m);
        Self::new(t_us, n_atoms, m.mean_y, ts.theta, ts.min_var)
    }

    /// Normalized variance `4 Var / N` and mean-spin fraction `2|<J_y>|/N`.
    pub fn normalized(&self) -> (f64, f64) {
        let n = self.n_atoms as f64;
        (2.0 * self.mean_spin / n, 4.0 * self.min_var / n)
    }
}

pub fn to_db(xi2: f64) -> f64 {
    10.0 * xi2.log10()
}

/// Smallest squeezing parameter any state of `n` spins can reach.
pub fn quantum_bound(n: usize) -> f64 {
    2.0 / (2.0 + n as f64)
}

/// Exact squeezing record of a state.
pub fn squeezing_record(v: &StateVector, t_us: f64) -> Result<SqueezingRecord> {
    let m = collective_expectations(v)?;
    Ok(SqueezingRecord::from_moments(t_us, v.n_spins(), &MomentSummary::from(&m)))
}
