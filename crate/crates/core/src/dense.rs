//! Dense reference propagation for small systems.
//!
//! The matrix is assembled from explicit Kronecker products of Pauli
//! matrices, independently of the bit tricks in [`crate::operators`], and
//! propagated through a full eigendecomposition.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operators::Hamiltonian;
use crate::state::StateVector;

pub const MAX_DENSE_SPINS: usize = 10;

#[derive(Debug, Clone, Copy)]
enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// 2x2 Pauli matrix in the `(down, up)` ordering of a single bit.
fn pauli(p: Pauli) -> DMatrix<C64> {
    let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[o, i, -i, o]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[-l, o, o, l]),
    }
}

/// Tensor product with site `n-1` as the most significant factor.
fn embed(n: usize, ops: &[(usize, Pauli)]) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for site in (0..n).rev() {
        let p = ops.iter().find(|(s, _)| *s == site).map_or(Pauli::I, |(_, p)| *p);
        m = m.kronecker(&pauli(p));
    }
    m
}

/// Full `2^N x 2^N` matrix of a Hamiltonian (MHz).
pub fn dense_matrix(h: &Hamiltonian) -> Result<DMatrix<C64>> {
    let n = h.n_spins();
    if n > MAX_DENSE_SPINS {
        return Err(Error::SystemTooLarge { n, max: MAX_DENSE_SPINS });
    }
    let dim = 1 << n;
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    let mut add_pair = |i: usize, j: usize, c: f64, paulis: &[Pauli]| {
        for &p in paulis {
            m += embed(n, &[(i, p), (j, p)]) * C64::new(c, 0.0);
        }
    };
    match h {
        Hamiltonian::Xy { j_mhz, couplings } => {
            for (i, j, w) in couplings.pairs() {
                add_pair(i, j, -j_mhz / 2.0 * w, &[Pauli::X, Pauli::Y]);
            }
        }
        Hamiltonian::Heisenberg { j_mhz, couplings } => {
            for (i, j, w) in couplings.pairs() {
                add_pair(i, j, -2.0 * j_mhz / 3.0 * w, &[Pauli::X, Pauli::Y, Pauli::Z]);
            }
        }
        Hamiltonian::Zz { couplings } => {
            for (i, j, w) in couplings.pairs() {
                add_pair(i, j, w, &[Pauli::Z]);
            }
        }
        Hamiltonian::Oat { chi_mhz, .. } => {
            let mut jz = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
            for i in 0..n {
                jz += embed(n, &[(i, Pauli::Z)]) * C64::new(0.5, 0.0);
            }
            m += &jz * &jz * C64::new(*chi_mhz, 0.0);
        }
    }
    Ok(m)
}

/// Eigendecomposition of a Hamiltonian, reusable across evolution times.
pub struct DenseOracle {
    n: usize,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl DenseOracle {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let m = dense_matrix(h)?;
        // all supported Hamiltonians are real in the z basis
        debug_assert!(m.iter().all(|c| c.im.abs() < 1e-12));
        let real = m.map(|c| c.re);
        let eig = SymmetricEigen::new(real);
        Ok(Self { n: h.n_spins(), energies: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn energies(&self) -> &[f64] {
        self.energies.as_slice()
    }

    pub fn evolve(&self, v: &StateVector, t_us: f64) -> Result<StateVector> {
        if v.n_spins() != self.n {
            return Err(Error::DimensionMismatch { expected: 1 << self.n, got: v.dim() });
        }
        let dim = v.dim();
        let amps = v.amplitudes();
        let coeffs: Vec<C64> = (0..dim)
            .map(|k| {
                let c: C64 = self.vectors.column(k).iter().zip(amps).map(|(u, a)| a * *u).sum();
                c * C64::from_polar(1.0, -TAU * self.energies[k] * t_us)
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (k, c) in coeffs.iter().enumerate() {
            for (o, u) in out.iter_mut().zip(self.vectors.column(k).iter()) {
                *o += c * *u;
            }
        }
        StateVector::from_amplitudes(self.n, out)
    }
}

/// `exp(-i 2 pi H t) v` by full diagonalization (N <= 10).
pub fn evolve_dense_oracle(h: &Hamiltonian, v: &StateVector, t_us: f64) -> Result<StateVector> {
    DenseOracle::new(h)?.evolve(v, t_us)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CouplingMatrix, LatticeSpec};
    use crate::operators::apply_hamiltonian;

    fn random_state(n: usize) -> StateVector {
        let amps: Vec<C64> = (0..1 << n).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 1.3).cos())).collect();
        let mut v = StateVector::from_amplitudes(n, amps).unwrap();
        v.normalize();
        v
    }

    fn xy(rows: usize, cols: usize) -> Hamiltonian {
        Hamiltonian::Xy { j_mhz: 0.25, couplings: LatticeSpec::square(rows, cols, 15.0).coupling_matrix().unwrap() }
    }

    #[test]
    fn matrix_free_matches_dense_for_every_kind() {
        let cm = LatticeSpec::square(2, 2, 15.0).coupling_matrix().unwrap();
        let hs = [
            Hamiltonian::Xy { j_mhz: 0.25, couplings: cm.clone() },
            Hamiltonian::Heisenberg { j_mhz: 0.3, couplings: cm.clone() },
            Hamiltonian::Zz { couplings: cm },
            Hamiltonian::Oat { n: 4, chi_mhz: 0.2 },
        ];
        let v = random_state(4);
        for h in &hs {
            let dense = dense_matrix(h).unwrap();
            let expected = &dense * DVector::from_column_slice(v.amplitudes());
            let got = apply_hamiltonian(h, &v).unwrap();
            for (a, b) in got.amplitudes().iter().zip(expected.iter()) {
                assert!((a - b).norm() < 1e-12, "{}", h.kind_name());
            }
        }
    }

    #[test]
    fn identity_at_zero() {
        let v = random_state(4);
        let out = evolve_dense_oracle(&xy(2, 2), &v, 0.0).unwrap();
        assert!(out.fidelity(&v) > 1.0 - 1e-12);
        for (a, b) in out.amplitudes().iter().zip(v.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_and_group_law() {
        let oracle = DenseOracle::new(&xy(2, 3)).unwrap();
        let v = random_state(6);
        let a = oracle.evolve(&oracle.evolve(&v, 0.3).unwrap(), 0.45).unwrap();
        let b = oracle.evolve(&v, 0.75).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn refuses_large_systems() {
        let h = Hamiltonian::Zz { couplings: CouplingMatrix::uniform(11, 1.0) };
        assert!(matches!(DenseOracle::new(&h), Err(Error::SystemTooLarge { .. })));
    }
}
