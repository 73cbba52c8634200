//! Collective-spin reduction: one-axis twisting in the symmetric sector.
//!
//! Projected onto total spin `N/2`, the dipolar XY model becomes the rotor
//! `chi J_z^2` with `chi = 1/(2I)` from [`crate::lattice::moment_of_inertia`].

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::measurement::{MomentSummary, SqueezingRecord};
use crate::operators::CollectiveMoments;

/// Amplitudes over `m = -N/2 ..= N/2`; index `u` holds `u` up spins.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeState {
    n: usize,
    amps: Vec<C64>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

impl DickeState {
    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::TooFewAtoms { needed: 1, got: 0 });
        }
        if amps.len() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, got: amps.len() });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { n, amps })
    }

    /// Every spin along `+y`: amplitude `sqrt(C(N,u)) i^(N-u) / 2^(N/2)`.
    pub fn coherent_y(n: usize) -> Self {
        let lf = ln_factorials(n);
        let mut amps: Vec<C64> = (0..=n)
            .map(|u| {
                let mag = (0.5 * (lf[n] - lf[u] - lf[n - u]) - 0.5 * n as f64 * std::f64::consts::LN_2).exp();
                mag * C64::i().powu(((n - u) % 4) as u32)
            })
            .collect();
        // remove the rounding left by the log-factorials
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Self { n, amps }
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    fn m(&self, u: usize) -> f64 {
        u as f64 - self.n as f64 / 2.0
    }

    /// `<m+1| J_+ |m>`
    fn ladder(&self, u: usize) -> f64 {
        let j = self.n as f64 / 2.0;
        let m = self.m(u);
        (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }

    /// Exact collective moments from ladder-operator matrix elements.
    pub fn moments(&self) -> CollectiveMoments {
        let j = self.n as f64 / 2.0;
        let a = &self.amps;
        let (mut jz, mut jz2) = (0.0, 0.0);
        let (mut jp, mut jp2, mut k) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for u in 0..=self.n {
            let m = self.m(u);
            let p = a[u].norm_sqr();
            jz += m * p;
            jz2 += m * m * p;
            if u < self.n {
                let c = self.ladder(u);
                let t = a[u + 1].conj() * a[u] * c;
                jp += t;
                // J_+ J_z + J_z J_+ on |m> gives (2m + 1) c |m+1>
                k += t * (2.0 * m + 1.0);
                if u + 1 < self.n {
                    jp2 += a[u + 2].conj() * a[u] * c * self.ladder(u + 1);
                }
            }
        }
        let perp = 2.0 * (j * (j + 1.0) - jz2);
        CollectiveMoments {
            n: self.n,
            jx: jp.re,
            jy: jp.im,
            jz,
            jx2: (2.0 * jp2.re + perp) / 4.0,
            jy2: (-2.0 * jp2.re + perp) / 4.0,
            jz2,
            sym_xz: k.re / 2.0,
        }
    }
}

/// Evolve under `chi J_z^2` for `t_us`: phase `exp(-i 2 pi chi m^2 t)`.
pub fn oat_evolve(d: &DickeState, chi_mhz: f64, t_us: f64) -> DickeState {
    let amps = d
        .amps
        .iter()
        .enumerate()
        .map(|(u, a)| {
            let m = d.m(u);
            a * C64::from_polar(1.0, -TAU * chi_mhz * m * m * t_us)
        })
        .collect();
    DickeState { n: d.n, amps }
}

/// Squeezing record of the twisted coherent state at time `t_us`.
pub fn oat_record(n: usize, chi_mhz: f64, t_us: f64) -> SqueezingRecord {
    let d = oat_evolve(&DickeState::coherent_y(n), chi_mhz, t_us);
    SqueezingRecord::from_moments(t_us, n, &MomentSummary::from(&d.moments()))
}

pub fn oat_squeezing_curve(n: usize, chi_mhz: f64, t_grid: &[f64]) -> Vec<SqueezingRecord> {
    let d0 = DickeState::coherent_y(n);
    t_grid
        .iter()
        .map(|&t| SqueezingRecord::from_moments(t, n, &MomentSummary::from(&oat_evolve(&d0, chi_mhz, t).moments())))
        .collect()
}

/// Best squeezing `(xi2*, t*)` before the first revival: coarse scan then
/// golden-section refinement of the first minimum.
pub fn oat_optimum(n: usize, chi_mhz: f64) -> Result<(f64, f64)> {
    if n < 2 || chi_mhz <= 0.0 {
        return Err(Error::InvalidParameter("OAT optimum needs N >= 2 and chi > 0".into()));
    }
    let f = |t: f64| oat_record(n, chi_mhz, t).xi2;
    // the optimum sits well inside a quarter of the revival period
    let t_max = 0.25 / (2.0 * chi_mhz);
    const SCAN: usize = 400;
    let grid: Vec<f64> = (1..=SCAN).map(|i| t_max * (i as f64 / SCAN as f64).powi(2)).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let i =
        (1..SCAN - 1).find(|&i| vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1]).ok_or(Error::NoInteriorMinimum)?;
    let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 * b {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    Ok((f(t), t))
}

/// Rotor part of the mean spin `<J_y>` at time `t_us`.
pub fn rotor_magnetization(n: usize, chi_mhz: f64, t_us: f64) -> f64 {
    oat_evolve(&DickeState::coherent_y(n), chi_mhz, t_us).moments().jy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{evolve, KrylovParams};
    use crate::lattice::{CouplingMatrix, LatticeSpec};
    use crate::operators::{collective_expectations, Hamiltonian};
    use crate::protocols::prepare_coherent_y;

    fn close(a: &CollectiveMoments, b: &CollectiveMoments, tol: f64) -> bool {
        [(a.jx, b.jx), (a.jy, b.jy), (a.jz, b.jz), (a.jx2, b.jx2), (a.jy2, b.jy2), (a.jz2, b.jz2), (a.sym_xz, b.sym_xz)]
            .iter()
            .all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn coherent_state_moments_match_full_space() {
        for n in [1, 2, 5, 8] {
            let d = DickeState::coherent_y(n).moments();
            let full = collective_expectations(&prepare_coherent_y(n)).unwrap();
            assert!(close(&d, &full, 1e-12), "n = {n}");
        }
    }

    #[test]
    fn identity_and_m_zero_invariance() {
        let d = DickeState::coherent_y(6);
        assert_eq!(oat_evolve(&d, 0.3, 0.0), d);
        let mut amps = vec![C64::new(0.0, 0.0); 7];
        amps[3] = C64::new(1.0, 0.0);
        let d0 = DickeState::from_amplitudes(6, amps).unwrap();
        for t in [0.1, 1.7, 42.0] {
            assert_eq!(oat_evolve(&d0, 0.3, t), d0);
        }
    }

    #[test]
    fn matches_all_to_all_zz_in_full_space() {
        // sum_{i<j} w s_z s_z = 2 w J_z^2 - const
        for n in [4, 6] {
            let w = 0.7;
            let h = Hamiltonian::Zz { couplings: CouplingMatrix::uniform(n, w) };
            let params = KrylovParams::default();
            for t in [0.05, 0.2, 0.9] {
                let full = collective_expectations(&evolve(&h, &prepare_coherent_y(n), t, &params).unwrap()).unwrap();
                let rot = oat_evolve(&DickeState::coherent_y(n), 2.0 * w, t).moments();
                assert!(close(&full, &rot, 1e-10), "n = {n}, t = {t}");
            }
        }
    }

    #[test]
    fn sql_at_start() {
        for n in [1, 3, 10, 100, 1000] {
            let r = oat_record(n, 0.1, 0.0);
            assert!((r.xi2 - 1.0).abs() < 1e-10, "n = {n}: {}", r.xi2);
        }
    }

    #[test]
    fn jz_distribution_is_conserved() {
        let d = DickeState::coherent_y(12);
        let e = oat_evolve(&d, 0.4, 0.77);
        for (a, b) in d.amplitudes().iter().zip(e.amplitudes()) {
            assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn magnetization_closed_form_and_revival() {
        let (n, chi) = (20, 0.13);
        for t in [0.0, 0.1, 0.5, 1.3] {
            let exact = n as f64 / 2.0 * (TAU * chi * t).cos().powi(n as i32 - 1);
            assert!((rotor_magnetization(n, chi, t) - exact).abs() < 1e-10);
        }
        for n in [7, 8, 31] {
            let t_rev = 1.0 / (2.0 * chi);
            assert!((rotor_magnetization(n, chi, t_rev).abs() - n as f64 / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn magnetization_decays_monotonically_at_early_times() {
        let cm = LatticeSpec::square(4, 4, 15.0).coupling_matrix().unwrap();
        let chi = cm.rotor_chi(0.25).unwrap();
        let t_end = 0.25 / (2.0 * chi);
        let vals: Vec<f64> = (0..=500).map(|i| rotor_magnetization(16, chi, t_end * i as f64 / 500.0)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn larger_lattices_hold_magnetization_longer() {
        let crossing = |side: usize| {
            let n = side * side;
            let chi = LatticeSpec::square(side, side, 15.0).coupling_matrix().unwrap().rotor_chi(0.25).unwrap();
            let mut t = 0.0;
            while rotor_magnetization(n, chi, t) / (n as f64 / 2.0) > 0.8 {
                t += 1e-3;
            }
            t
        };
        let ts: Vec<f64> = [2, 3, 4, 6, 8].into_iter().map(crossing).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]), "{ts:?}");
    }

    #[test]
    fn optimum_is_a_minimum() {
        let (xi2, t) = oat_optimum(32, 0.05).unwrap();
        assert!(xi2 < 1.0);
        for dt in [-0.01, 0.01] {
            assert!(oat_record(32, 0.05, t * (1.0 + dt)).xi2 >= xi2 - 1e-12);
        }
        assert!(xi2 >= crate::measurement::quantum_bound(32));
    }
}
