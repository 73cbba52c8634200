//! Square-array geometry, dipolar couplings and the rotor coefficient.
//!
//! Sites are numbered row-major over the full `rows x cols` grid; holes are
//! then removed and the remaining atoms are renumbered in the same order.
//! Site `r * cols + c` sits at `(c * a, r * a)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    /// Lattice constant in micrometers.
    #[serde(default = "default_spacing")]
    pub spacing_um: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// Full-grid indices of empty sites.
    #[serde(default)]
    pub holes: BTreeSet<usize>,
}

fn default_spacing() -> f64 {
    15.0
}

impl LatticeSpec {
    pub fn square(rows: usize, cols: usize, spacing_um: f64) -> Self {
        Self { rows, cols, spacing_um, boundary: Boundary::Open, holes: BTreeSet::new() }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_holes<I: IntoIterator<Item = usize>>(mut self, holes: I) -> Self {
        self.holes.extend(holes);
        self
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of atoms that take part in the dynamics.
    pub fn n_atoms(&self) -> usize {
        self.n_sites().saturating_sub(self.holes.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidLattice("rows and cols must be positive".into()));
        }
        if !(self.spacing_um > 0.0 && self.spacing_um.is_finite()) {
            return Err(Error::InvalidLattice(format!("spacing must be positive, got {}", self.spacing_um)));
        }
        if let Some(&h) = self.holes.iter().find(|&&h| h >= self.n_sites()) {
            return Err(Error::InvalidLattice(format!("hole index {h} outside a {}x{} grid", self.rows, self.cols)));
        }
        if self.n_atoms() == 0 {
            return Err(Error::EmptyLattice);
        }
        Ok(())
    }

    /// Full-grid indices of the occupied sites, in the compacted order.
    pub fn occupied_sites(&self) -> Vec<usize> {
        (0..self.n_sites()).filter(|s| !self.holes.contains(s)).collect()
    }

    /// Extent of the periodic cell, when the boundary is periodic.
    pub fn period(&self) -> Option<[f64; 2]> {
        match self.boundary {
            Boundary::Open => None,
            Boundary::Periodic => Some([self.cols as f64 * self.spacing_um, self.rows as f64 * self.spacing_um]),
        }
    }

    pub fn coupling_matrix(&self) -> Result<CouplingMatrix> {
        let positions = build_lattice(self)?;
        coupling_matrix(&positions, self.spacing_um, self.period())
    }
}

/// Atom positions in micrometers with holes removed.
pub fn build_lattice(spec: &LatticeSpec) -> Result<Vec<[f64; 2]>> {
    spec.validate()?;
    let a = spec.spacing_um;
    Ok(spec.occupied_sites().into_iter().map(|s| [(s % spec.cols) as f64 * a, (s / spec.cols) as f64 * a]).collect())
}

/// Symmetric matrix of dimensionless couplings `(a / r_ij)^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    w: Vec<f64>,
}

impl CouplingMatrix {
    /// All-to-all couplings of equal strength.
    pub fn uniform(n: usize, strength: f64) -> Self {
        let mut w = vec![strength; n * n];
        for i in 0..n {
            w[i * n + i] = 0.0;
        }
        Self { n, w }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut w = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            w.extend_from_slice(row);
        }
        for i in 0..n {
            if w[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal coupling at site {i}")));
            }
            for j in 0..i {
                let (a, b) = (w[i * n + j], w[j * n + i]);
                if a < 0.0 || (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!("couplings ({i},{j}) not symmetric and nonnegative")));
                }
            }
        }
        Ok(Self { n, w })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// Iterator over `(i, j, w_ij)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn pair_sum(&self) -> f64 {
        self.pairs().map(|(_, _, w)| w).sum()
    }

    /// Relabel sites: entry `(i, j)` of the result is `(perm[i], perm[j])` of self.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                w[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, w }
    }

    /// Rotor coefficient `1/(2I) = 2J [N(N-1)]^-1 sum_{i<j} w_ij` in MHz.
    ///
    /// This is the strength of the `J_z^2` term that the XY Hamiltonian
    /// reduces to inside the fully symmetric sector.
    pub fn rotor_chi(&self, j_mhz: f64) -> Result<f64> {
        moment_of_inertia(self, j_mhz)
    }
}

/// Couplings `(a / r_ij)^3`; `period` switches on minimum-image distances.
pub fn coupling_matrix(positions: &[[f64; 2]], spacing_um: f64, period: Option<[f64; 2]>) -> Result<CouplingMatrix> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::EmptyLattice);
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d = [positions[j][0] - positions[i][0], positions[j][1] - positions[i][1]];
            if let Some(box_len) = period {
                for k in 0..2 {
                    d[k] -= box_len[k] * (d[k] / box_len[k]).round();
                }
            }
            let r = d[0].hypot(d[1]);
            if r <= 1e-12 * spacing_um {
                return Err(Error::CoincidentSites(i, j));
            }
            let v = (spacing_um / r).powi(3);
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    Ok(CouplingMatrix { n, w })
}

/// `1/(2I)` in MHz for a given coupling matrix and `J/h`.
pub fn moment_of_inertia(cm: &CouplingMatrix, j_mhz: f64) -> Result<f64> {
    let n = cm.n_sites();
    if n < 2 {
        return Err(Error::TooFewAtoms { needed: 2, got: n });
    }
    Ok(2.0 * j_mhz * cm.pair_sum() / (n * (n - 1)) as f64)
}
