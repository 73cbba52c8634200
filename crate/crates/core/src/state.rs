//! Many-body state vectors over the `2^N` computational basis.
//!
//! Bit `i` of a basis index is the state of site `i`; a set bit is `|up>`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest system the full-Hilbert engine accepts by default.
pub const DEFAULT_MAX_SPINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: amps.len() });
        }
        Ok(Self { n, amps })
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[index] = C64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn all_up(n: usize) -> Self {
        Self::basis(n, (1 << n) - 1)
    }

    pub fn all_down(n: usize) -> Self {
        Self::basis(n, 0)
    }

    /// Product state from one two-component spinor `(up, down)` per site.
    pub fn product(spinors: &[[C64; 2]]) -> Self {
        let n = spinors.len();
        let amps = (0..1usize << n)
            .map(|s| {
                spinors
                    .iter()
                    .enumerate()
                    .fold(C64::new(1.0, 0.0), |acc, (i, sp)| acc * if s >> i & 1 == 1 { sp[0] } else { sp[1] })
            })
            .collect();
        Self { n, amps }
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalize(&mut self) {
        let s = self.norm();
        if s > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= s);
        }
    }

    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.amps, &other.amps)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let nrm = self.norm();
        if (nrm - 1.0).abs() > tol {
            return Err(Error::NotNormalized(nrm));
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_states() {
        let up = StateVector::all_up(3);
        assert_eq!(up.amplitudes()[7], C64::new(1.0, 0.0));
        assert_eq!(StateVector::all_down(3).amplitudes()[0], C64::new(1.0, 0.0));
        assert!((up.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_matches_bit_convention() {
        let up = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let down = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        // site 0 up, site 1 down -> index 0b01
        let s = StateVector::product(&[up, down]);
        assert_eq!(s, StateVector::basis(2, 1));
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(StateVector::from_amplitudes(2, vec![C64::new(1.0, 0.0); 3]).is_err());
    }
}
