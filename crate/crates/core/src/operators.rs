//! Matrix-free spin Hamiltonians and collective spin operators.
//!
//! Every Hamiltonian coefficient is a frequency in MHz. Exchange terms are
//! applied on the fly; everything diagonal in the `sigma^z` basis is folded
//! into one precomputed vector.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::CouplingMatrix;
use crate::state::{inner, StateVector};

/// Below this dimension the sequential loop beats the thread pool.
const PAR_THRESHOLD: usize = 1 << 12;
const CHUNK: usize = 1 << 10;

/// A Hermitian operator acting on `2^N` amplitudes.
pub trait SpinOperator: Sync {
    fn n_spins(&self) -> usize;

    fn apply_into(&self, v: &[C64], out: &mut [C64]);

    fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        out
    }
}

/// Fill `out[s] = f(s)` for every basis index, in parallel for large vectors.
pub(crate) fn fill_indexed<F>(out: &mut [C64], f: F)
where
    F: Fn(usize) -> C64 + Sync,
{
    if out.len() < PAR_THRESHOLD {
        out.iter_mut().enumerate().for_each(|(s, o)| *o = f(s));
    } else {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            chunk.iter_mut().enumerate().for_each(|(k, o)| *o = f(base + k));
        });
    }
}

/// Interaction Hamiltonians of the model.
///
/// * `Xy`: `-(J/2) sum_{i<j} w_ij (sx_i sx_j + sy_i sy_j)`
/// * `Heisenberg`: `-(2J/3) sum_{i<j} w_ij s_i . s_j`
/// * `Zz`: `sum_{i<j} w_ij sz_i sz_j`
/// * `Oat`: `chi J_z^2`
#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian {
    Xy { j_mhz: f64, couplings: CouplingMatrix },
    Heisenberg { j_mhz: f64, couplings: CouplingMatrix },
    Zz { couplings: CouplingMatrix },
    Oat { n: usize, chi_mhz: f64 },
}

impl Hamiltonian {
    pub fn n_spins(&self) -> usize {
        match self {
            Hamiltonian::Xy { couplings, .. }
            | Hamiltonian::Heisenberg { couplings, .. }
            | Hamiltonian::Zz { couplings } => couplings.n_sites(),
            Hamiltonian::Oat { n, .. } => *n,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Hamiltonian::Xy { .. } => "xy",
            Hamiltonian::Heisenberg { .. } => "heisenberg",
            Hamiltonian::Zz { .. } => "zz",
            Hamiltonian::Oat { .. } => "oat",
        }
    }

    /// Split into diagonal and exchange parts, ready for repeated application.
    pub fn compile(&self) -> CompiledHamiltonian {
        let n = self.n_spins();
        // (zz coefficient, exchange amplitude) per pair
        let pair_terms: Vec<(usize, usize, f64, f64)> = match self {
            Hamiltonian::Xy { j_mhz, couplings } => {
                couplings.pairs().map(|(i, j, w)| (i, j, 0.0, -j_mhz * w)).collect()
            }
            Hamiltonian::Heisenberg { j_mhz, couplings } => couplings
                .pairs()
                .map(|(i, j, w)| {
                    let c = -2.0 * j_mhz / 3.0 * w;
                    (i, j, c, 2.0 * c)
                })
                .collect(),
            Hamiltonian::Zz { couplings } => couplings.pairs().map(|(i, j, w)| (i, j, w, 0.0)).collect(),
            Hamiltonian::Oat { .. } => Vec::new(),
        };

        let dim = 1usize << n;
        let diag: Vec<f64> = match self {
            Hamiltonian::Oat { chi_mhz, .. } => (0..dim)
                .map(|s| {
                    let m = s.count_ones() as f64 - n as f64 / 2.0;
                    chi_mhz * m * m
                })
                .collect(),
            _ => (0..dim)
                .map(|s| {
                    pair_terms
                        .iter()
                        .filter(|t| t.2 != 0.0)
                        .map(|&(i, j, zz, _)| if (s >> i ^ s >> j) & 1 == 0 { zz } else { -zz })
                        .sum()
                })
                .collect(),
        };
        let exchange = pair_terms
            .into_iter()
            .filter(|t| t.3 != 0.0)
            .map(|(i, j, _, amp)| Exchange { i, j, mask: 1 << i | 1 << j, amp })
            .collect();
        CompiledHamiltonian { n, diag, exchange }
    }
}

#[derive(Debug, Clone, Copy)]
struct Exchange {
    i: usize,
    j: usize,
    mask: usize,
    amp: f64,
}

/// Diagonal vector plus flip-flop terms acting on antiparallel pairs.
#[derive(Debug, Clone)]
pub struct CompiledHamiltonian {
    n: usize,
    diag: Vec<f64>,
    exchange: Vec<Exchange>,
}

impl CompiledHamiltonian {
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Upper bound on the spectral radius (Gershgorin), in MHz.
    pub fn norm_bound(&self) -> f64 {
        let off: f64 = self.exchange.iter().map(|e| e.amp.abs()).sum();
        self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + off
    }
}

impl SpinOperator for CompiledHamiltonian {
    fn n_spins(&self) -> usize {
        self.n
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        fill_indexed(out, |s| {
            let mut acc = v[s] * self.diag[s];
            for e in &self.exchange {
                if (s >> e.i ^ s >> e.j) & 1 == 1 {
                    acc += v[s ^ e.mask] * e.amp;
                }
            }
            acc
        });
    }
}

/// `H v` without forming a matrix.
pub fn apply_hamiltonian(h: &Hamiltonian, v: &StateVector) -> Result<StateVector> {
    if v.n_spins() != h.n_spins() {
        return Err(Error::DimensionMismatch { expected: 1 << h.n_spins(), got: v.dim() });
    }
    let out = h.compile().apply(v.amplitudes());
    StateVector::from_amplitudes(v.n_spins(), out)
}

/// Collective spin component `J = (1/2) sum_i sigma_i^axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollectiveAxis {
    X,
    Y,
    Z,
    /// Direction in the x-y plane at azimuth `phi`.
    Azimuth(f64),
    /// `cos(theta) J_z + sin(theta) J_x`.
    Theta(f64),
}

/// Action of `sum_i (cos(phi) sx_i + sin(phi) sy_i)` scaled by `scale`, plus
/// `diag_scale * sum_i sz_i`.
#[derive(Debug, Clone, Copy)]
pub struct TransverseField {
    n: usize,
    /// multiplies the flip leading into an `up` bit
    raise: C64,
    /// multiplies the flip leading into a `down` bit
    lower: C64,
    diag_scale: f64,
}

impl TransverseField {
    pub fn new(n: usize, phi: f64, scale: f64) -> Self {
        Self::with_z(n, phi, scale, 0.0)
    }

    pub fn with_z(n: usize, phi: f64, scale: f64, z_scale: f64) -> Self {
        Self { n, raise: C64::from_polar(scale, -phi), lower: C64::from_polar(scale, phi), diag_scale: z_scale }
    }

    pub fn collective(n: usize, axis: CollectiveAxis) -> Self {
        match axis {
            CollectiveAxis::X => Self::new(n, 0.0, 0.5),
            CollectiveAxis::Y => Self::new(n, FRAC_PI_2, 0.5),
            CollectiveAxis::Z => Self::with_z(n, 0.0, 0.0, 0.5),
            CollectiveAxis::Azimuth(phi) => Self::new(n, phi, 0.5),
            CollectiveAxis::Theta(theta) => Self::with_z(n, 0.0, 0.5 * theta.sin(), 0.5 * theta.cos()),
        }
    }
}

impl SpinOperator for TransverseField {
    fn n_spins(&self) -> usize {
        self.n
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let n = self.n;
        let flips = self.raise != C64::new(0.0, 0.0) || self.lower != C64::new(0.0, 0.0);
        fill_indexed(out, |s| {
            let mut acc = C64::new(0.0, 0.0);
            if self.diag_scale != 0.0 {
                let z = 2.0 * s.count_ones() as f64 - n as f64;
                acc += v[s] * (self.diag_scale * z);
            }
            if flips {
                for i in 0..n {
                    let c = if s >> i & 1 == 1 { self.raise } else { self.lower };
                    acc += v[s ^ 1 << i] * c;
                }
            }
            acc
        });
    }
}

/// Sum of two operators on the same space.
pub struct Sum<'a, A: SpinOperator + ?Sized, B: SpinOperator + ?Sized>(pub &'a A, pub &'a B);

impl<A: SpinOperator + ?Sized, B: SpinOperator + ?Sized> SpinOperator for Sum<'_, A, B> {
    fn n_spins(&self) -> usize {
        self.0.n_spins()
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        self.0.apply_into(v, out);
        let extra = self.1.apply(v);
        out.iter_mut().zip(extra).for_each(|(o, e)| *o += e);
    }
}

pub fn apply_collective(axis: CollectiveAxis, v: &StateVector) -> StateVector {
    let out = TransverseField::collective(v.n_spins(), axis).apply(v.amplitudes());
    StateVector::from_amplitudes(v.n_spins(), out).expect("same dimension")
}

/// First and second moments of the collective spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveMoments {
    pub n: usize,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    /// `<{J_x, J_z}> / 2`
    pub sym_xz: f64,
}

impl CollectiveMoments {
    pub fn var_x(&self) -> f64 {
        self.jx2 - self.jx * self.jx
    }

    pub fn var_y(&self) -> f64 {
        self.jy2 - self.jy * self.jy
    }

    pub fn var_z(&self) -> f64 {
        self.jz2 - self.jz * self.jz
    }

    pub fn cov_xz(&self) -> f64 {
        self.sym_xz - self.jx * self.jz
    }
}

/// Exact collective moments of a normalized state.
pub fn collective_expectations(v: &StateVector) -> Result<CollectiveMoments> {
    v.check_normalized(1e-10)?;
    let n = v.n_spins();
    let amps = v.amplitudes();
    let jx_v = TransverseField::collective(n, CollectiveAxis::X).apply(amps);
    let jy_v = TransverseField::collective(n, CollectiveAxis::Y).apply(amps);

    let (mut jz, mut jz2) = (0.0, 0.0);
    let mut sym_xz = 0.0;
    for (s, (a, xa)) in amps.iter().zip(&jx_v).enumerate() {
        let m = s.count_ones() as f64 - n as f64 / 2.0;
        let p = a.norm_sqr();
        jz += m * p;
        jz2 += m * m * p;
        // Re <J_x v | J_z v>
        sym_xz += m * (xa.conj() * a).re;
    }
    Ok(CollectiveMoments {
        n,
        jx: inner(amps, &jx_v).re,
        jy: inner(amps, &jy_v).re,
        jz,
        jx2: inner(&jx_v, &jx_v).re,
        jy2: inner(&jy_v, &jy_v).re,
        jz2,
        sym_xz,
    })
}
