//! Lanczos approximation of `exp(-i 2 pi H t) v`.
//!
//! Each substep builds an orthonormal Krylov basis with full
//! reorthogonalization, exponentiates the small tridiagonal projection, and
//! accepts the step once the a-posteriori estimate
//! `|v| * beta_m * |[exp(-i 2 pi tau T) e_1]_m|` is below `tol`. The substep is
//! halved on rejection; the basis is reused across halvings.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{CompiledHamiltonian, Hamiltonian, SpinOperator};
use crate::state::{inner, norm, StateVector, DEFAULT_MAX_SPINS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovParams {
    pub max_dim: usize,
    /// Largest substep in microseconds.
    pub step_us: f64,
    /// Local error target per substep.
    pub tol: f64,
    pub max_spins: usize,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self { max_dim: 30, step_us: 0.01, tol: 1e-10, max_spins: DEFAULT_MAX_SPINS }
    }
}

impl KrylovParams {
    pub fn with_step(mut self, step_us: f64) -> Self {
        self.step_us = step_us;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_dim < 2 {
            return Err(Error::InvalidParameter(format!("Krylov dimension must be >= 2, got {}", self.max_dim)));
        }
        if !(self.step_us > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("Krylov step and tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Smallest substep before giving up, relative to the requested one.
const MIN_STEP_FRACTION: f64 = 1e-8;

struct KrylovBasis {
    vectors: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// coupling out of the subspace; zero on invariant subspaces
    beta_out: f64,
}

impl KrylovBasis {
    /// Lanczos with full reorthogonalization; stops early once `tau` is reachable.
    fn build(op: &dyn SpinOperator, v: &[C64], v_norm: f64, max_dim: usize, tau: f64, tol: f64) -> Self {
        let dim = v.len();
        let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(max_dim);
        vectors.push(v.iter().map(|a| a / v_norm).collect());
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let max_dim = max_dim.min(dim);
        loop {
            let j = vectors.len() - 1;
            op.apply_into(&vectors[j], &mut w);
            let a = inner(&vectors[j], &w).re;
            alpha.push(a);
            // two passes of Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for q in &vectors {
                    let c = inner(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm(&w);
            let invariant = b <= 1e-13 * (a.abs() + beta.last().copied().unwrap_or(0.0) + 1.0);
            if invariant || vectors.len() == max_dim {
                return Self { vectors, alpha, beta, beta_out: if invariant { 0.0 } else { b } };
            }
            // early exit if the current subspace already meets the target
            if vectors.len() >= 4 && vectors.len().is_multiple_of(4) {
                let trial = Self { vectors: Vec::new(), alpha: alpha.clone(), beta: beta.clone(), beta_out: b };
                if trial.small_exp(tau).1 * v_norm <= tol {
                    return Self { vectors, alpha, beta, beta_out: b };
                }
            }
            beta.push(b);
            vectors.push(w.iter().map(|x| x / b).collect());
        }
    }

    /// `exp(-i 2 pi tau T) e_1` and its error estimate (per unit input norm).
    fn small_exp(&self, tau: f64) -> (Vec<C64>, f64) {
        let m = self.alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            t[(k, k)] = self.alpha[k];
            if k + 1 < m {
                t[(k, k + 1)] = self.beta[k];
                t[(k + 1, k)] = self.beta[k];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut c = vec![C64::new(0.0, 0.0); m];
        for k in 0..m {
            let phase = C64::from_polar(eig.eigenvectors[(0, k)], -TAU * tau * eig.eigenvalues[k]);
            for (r, ci) in c.iter_mut().enumerate() {
                *ci += phase * eig.eigenvectors[(r, k)];
            }
        }
        let err = self.beta_out * c[m - 1].norm();
        (c, err)
    }
}

/// Reusable propagator for one generator.
pub struct Propagator<'a> {
    op: &'a dyn SpinOperator,
    params: KrylovParams,
}

impl<'a> Propagator<'a> {
    pub fn new(op: &'a dyn SpinOperator, params: KrylovParams) -> Result<Self> {
        params.validate()?;
        if op.n_spins() > params.max_spins {
            return Err(Error::SystemTooLarge { n: op.n_spins(), max: params.max_spins });
        }
        Ok(Self { op, params })
    }

    pub fn evolve(&self, v: &StateVector, t_us: f64) -> Result<StateVector> {
        if v.n_spins() != self.op.n_spins() {
            return Err(Error::DimensionMismatch { expected: self.op.dim(), got: v.dim() });
        }
        if !(t_us >= 0.0) {
            return Err(Error::InvalidParameter(format!("evolution time must be >= 0, got {t_us}")));
        }
        let mut amps = v.amplitudes().to_vec();
        let mut remaining = t_us;
        let p = &self.params;
        while remaining > 0.0 {
            let target = remaining.min(p.step_us);
            let v_norm = norm(&amps);
            let basis = KrylovBasis::build(self.op, &amps, v_norm, p.max_dim, target, p.tol);
            let mut tau = target;
            let (coeffs, taken) = loop {
                let (c, err) = basis.small_exp(tau);
                if err * v_norm <= p.tol {
                    break (c, tau);
                }
                tau *= 0.5;
                if tau < target * MIN_STEP_FRACTION {
                    return Err(Error::KrylovBreakdown { residual: err * v_norm, tol: p.tol });
                }
            };
            let mut next = vec![C64::new(0.0, 0.0); amps.len()];
            for (q, c) in basis.vectors.iter().zip(&coeffs) {
                let c = c * v_norm;
                next.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
            }
            // strip the accumulated norm drift
            let drift = norm(&next);
            next.iter_mut().for_each(|x| *x *= v_norm / drift);
            amps = next;
            // avoid a sliver step from rounding
            remaining = if (remaining - taken).abs() <= 1e-14 * t_us.max(1.0) { 0.0 } else { remaining - taken };
        }
        StateVector::from_amplitudes(v.n_spins(), amps)
    }
}

/// `exp(-i 2 pi H t) v` for a matrix-free Hamiltonian.
pub fn evolve(h: &Hamiltonian, v: &StateVector, t_us: f64, params: &KrylovParams) -> Result<StateVector> {
    if t_us == 0.0 {
        return Ok(v.clone());
    }
    if h.n_spins() > params.max_spins {
        return Err(Error::SystemTooLarge { n: h.n_spins(), max: params.max_spins });
    }
    let compiled = h.compile();
    Propagator::new(&compiled, *params)?.evolve(v, t_us)
}

/// Same as [`evolve`] but for an already compiled or composite generator.
pub fn evolve_operator(
    op: &dyn SpinOperator,
    v: &StateVector,
    t_us: f64,
    params: &KrylovParams,
) -> Result<StateVector> {
    if t_us == 0.0 {
        return Ok(v.clone());
    }
    Propagator::new(op, *params)?.evolve(v, t_us)
}

/// Compile once and evolve through a sorted list of checkpoints.
pub fn evolve_checkpoints(
    h: &Hamiltonian,
    v: &StateVector,
    times: &[f64],
    params: &KrylovParams,
) -> Result<Vec<StateVector>> {
    let compiled: CompiledHamiltonian = h.compile();
    let prop = Propagator::new(&compiled, *params)?;
    let mut out = Vec::with_capacity(times.len());
    let (mut t_now, mut state) = (0.0, v.clone());
    for &t in times {
        if t < t_now {
            return Err(Error::InvalidParameter("checkpoints must be sorted".into()));
        }
        state = prop.evolve(&state, t - t_now)?;
        t_now = t;
        out.push(state.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseOracle;
    use crate::lattice::LatticeSpec;
    use crate::operators::collective_expectations;

    fn xy(rows: usize, cols: usize) -> Hamiltonian {
        Hamiltonian::Xy { j_mhz: 0.25, couplings: LatticeSpec::square(rows, cols, 15.0).coupling_matrix().unwrap() }
    }

    fn coherent_y(n: usize) -> StateVector {
        let s = 1.0 / 2f64.sqrt();
        StateVector::product(&vec![[C64::new(s, 0.0), C64::new(0.0, s)]; n])
    }

    #[test]
    fn zero_time_is_identity() {
        let v = coherent_y(4);
        assert_eq!(evolve(&xy(2, 2), &v, 0.0, &KrylovParams::default()).unwrap(), v);
    }

    #[test]
    fn two_site_exchange_transfer() {
        // exchange element -J: populations go as sin^2(2 pi J t)
        let h = xy(1, 2);
        let p = KrylovParams::default();
        let half = evolve(&h, &StateVector::basis(2, 0b01), 1.0, &p).unwrap();
        assert!(half.fidelity(&StateVector::basis(2, 0b10)) >= 1.0 - 1e-8);
        let full = evolve(&h, &StateVector::basis(2, 0b01), 2.0, &p).unwrap();
        assert!(full.fidelity(&StateVector::basis(2, 0b01)) >= 1.0 - 1e-8);
    }

    #[test]
    fn matches_dense_on_three_by_three() {
        let h = xy(3, 3);
        let v = coherent_y(9);
        let k = evolve(&h, &v, 0.3, &KrylovParams::default()).unwrap();
        let d = DenseOracle::new(&h).unwrap().evolve(&v, 0.3).unwrap();
        assert!(k.fidelity(&d) >= 1.0 - 1e-8);
        assert!((k.norm() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn large_substeps_still_accurate() {
        let h = xy(2, 3);
        let v = coherent_y(6);
        let k = evolve(&h, &v, 1.7, &KrylovParams::default().with_step(0.5)).unwrap();
        let d = DenseOracle::new(&h).unwrap().evolve(&v, 1.7).unwrap();
        assert!(k.fidelity(&d) >= 1.0 - 1e-9);
    }

    #[test]
    fn energy_and_jz_conserved() {
        let h = xy(3, 3);
        let c = h.compile();
        let v = coherent_y(9);
        let e0 = inner(v.amplitudes(), &c.apply(v.amplitudes())).re;
        let states = evolve_checkpoints(&h, &v, &[0.2, 0.5, 0.9], &KrylovParams::default()).unwrap();
        for s in &states {
            let e = inner(s.amplitudes(), &c.apply(s.amplitudes())).re;
            assert!((e - e0).abs() <= 1e-8 * e0.abs().max(1.0));
            let m = collective_expectations(s).unwrap();
            assert!(m.jz.abs() < 1e-8);
            assert!((m.var_z() - 9.0 / 4.0).abs() < 1e-8);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = KrylovParams { max_dim: 1, ..Default::default() };
        assert!(evolve(&xy(1, 2), &coherent_y(2), 0.1, &p).is_err());
        let p = KrylovParams { max_spins: 3, ..Default::default() };
        assert!(matches!(evolve(&xy(2, 2), &coherent_y(4), 0.1, &p), Err(Error::SystemTooLarge { .. })));
        assert!(evolve(&xy(1, 2), &coherent_y(2), -1.0, &KrylovParams::default()).is_err());
    }

    #[test]
    fn breakdown_reports_residual() {
        // a tiny subspace cannot reach an absurd tolerance
        let p = KrylovParams { max_dim: 2, step_us: 1.0, tol: 1e-300, ..Default::default() };
        match evolve(&xy(2, 2), &coherent_y(4), 1.0, &p) {
            Err(Error::KrylovBreakdown { residual, tol }) => assert!(residual > tol),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }
}
