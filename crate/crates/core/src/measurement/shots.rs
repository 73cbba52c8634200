//! Projective snapshots and their statistics.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{rotate, PREPARATION_PHASE};
use crate::state::StateVector;

/// Seed for bootstrap resampling; error bars are reproducible run to run.
pub const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

/// Which analysis pulse precedes the projective z measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Readout {
    /// Rotation by `-theta` about `y`; the measured `J_z` is `J_theta`.
    Variance { theta: f64 },
    /// The preparation pulse again; the measured `J_z` is `-J_y`.
    SpinLength,
}

impl Readout {
    /// `(phase, angle)` of the analysis pulse, with an optional over-rotation
    /// `bias` added to the pulse area.
    pub fn pulse(&self, bias: f64) -> (f64, f64) {
        match *self {
            Readout::Variance { theta } => {
                let angle = -theta;
                (FRAC_PI_2, angle + bias * angle.signum())
            }
            Readout::SpinLength => (PREPARATION_PHASE, FRAC_PI_2 + bias),
        }
    }

    /// Sign turning the measured `J_z` into the observable of interest.
    pub fn sign(&self) -> f64 {
        match self {
            Readout::Variance { .. } => 1.0,
            Readout::SpinLength => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotMeta {
    pub readout: Option<Readout>,
    pub t_us: f64,
    pub seed: u64,
}

impl Default for ShotMeta {
    fn default() -> Self {
        Self { readout: None, t_us: 0.0, seed: 0 }
    }
}

/// Shots x atoms matrix of `+-1` outcomes (`+1` = up).
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    n_atoms: usize,
    n_shots: usize,
    outcomes: Vec<i8>,
    pub meta: ShotMeta,
}

impl ShotSet {
    pub fn from_rows(rows: Vec<Vec<i8>>, meta: ShotMeta) -> Result<Self> {
        let n_atoms = rows.first().map_or(0, Vec::len);
        let n_shots = rows.len();
        let mut outcomes = Vec::with_capacity(rows.len() * n_atoms);
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != n_atoms {
                return Err(Error::DimensionMismatch { expected: n_atoms, got: row.len() });
            }
            if let Some(bad) = row.iter().find(|&&x| x != 1 && x != -1) {
                return Err(Error::InvalidParameter(format!("shot {k}: outcome {bad} is not +-1")));
            }
            outcomes.extend(row);
        }
        Ok(Self { n_atoms, n_shots, outcomes, meta })
    }

    /// Shots over zero atoms, e.g. when every atom is a hole.
    pub fn empty(n_shots: usize, meta: ShotMeta) -> Self {
        Self { n_atoms: 0, n_shots, outcomes: Vec::new(), meta }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn row(&self, k: usize) -> &[i8] {
        &self.outcomes[k * self.n_atoms..(k + 1) * self.n_atoms]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        (0..self.n_shots).map(|k| self.row(k))
    }

    pub fn rows_mut(&mut self) -> impl Iterator<Item = &mut [i8]> {
        self.outcomes.chunks_exact_mut(self.n_atoms.max(1))
    }

    /// Append `extra` always-up columns (atoms imaged as up regardless of the state).
    pub fn with_up_columns(&self, extra: usize) -> Self {
        let n = self.n_atoms + extra;
        let mut outcomes = Vec::with_capacity(self.n_shots() * n);
        for row in self.rows() {
            outcomes.extend_from_slice(row);
            outcomes.extend(std::iter::repeat_n(1i8, extra));
        }
        Self { n_atoms: n, n_shots: self.n_shots, outcomes, meta: self.meta }
    }

    /// Stack shot sets over the same atoms.
    pub fn concat(parts: &[ShotSet], meta: ShotMeta) -> Result<Self> {
        let n_atoms = parts.first().map_or(0, |p| p.n_atoms);
        let mut outcomes = Vec::new();
        let mut n_shots = 0;
        for p in parts {
            if p.n_atoms != n_atoms {
                return Err(Error::DimensionMismatch { expected: n_atoms, got: p.n_atoms });
            }
            outcomes.extend_from_slice(&p.outcomes);
            n_shots += p.n_shots;
        }
        Ok(Self { n_atoms, n_shots, outcomes, meta })
    }

    /// Measured collective value `J_z = sum/2` of every shot, times the readout sign.
    pub fn collective_values(&self) -> Vec<f64> {
        let sign = self.meta.readout.map_or(1.0, |r| r.sign());
        self.rows().map(|r| sign * 0.5 * r.iter().map(|&x| x as f64).sum::<f64>()).collect()
    }

    /// Headerless CSV, one shot per line.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P, meta: ShotMeta) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.parse::<i8>().map_err(|_| Error::InvalidParameter(format!("bad outcome {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidParameter("shot file is empty".into()));
        }
        Self::from_rows(rows, meta)
    }
}

/// Sample `n_shots` snapshots after the analysis pulse. Shot `k` draws from
/// its own stream of the seeded generator, so the result does not depend on
/// the thread count.
pub fn sample_shots(v: &StateVector, readout: Readout, n_shots: usize, seed: u64) -> Result<ShotSet> {
    sample_shots_biased(v, readout, 0.0, n_shots, seed)
}

/// As [`sample_shots`] with an over-rotation `bias` (radians) on the analysis pulse.
pub fn sample_shots_biased(v: &StateVector, readout: Readout, bias: f64, n_shots: usize, seed: u64) -> Result<ShotSet> {
    if n_shots == 0 {
        return Err(Error::InvalidParameter("need at least one shot".into()));
    }
    v.check_normalized(1e-9)?;
    let (phase, angle) = readout.pulse(bias);
    let rotated = rotate(v, phase, angle);
    let mut cdf = rotated.probabilities();
    let mut acc = 0.0;
    for p in cdf.iter_mut() {
        acc += *p;
        *p = acc;
    }
    let n = v.n_spins();
    let mut outcomes = vec![0i8; n_shots * n];
    outcomes.par_chunks_mut(n.max(1)).enumerate().for_each(|(k, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        for (i, x) in row.iter_mut().enumerate() {
            *x = if idx >> i & 1 == 1 { 1 } else { -1 };
        }
    });
    Ok(ShotSet { n_atoms: n, n_shots, outcomes, meta: ShotMeta { readout: Some(readout), t_us: 0.0, seed } })
}

/// Bootstrap standard error of `stat` over `resamples` resamplings.
pub fn bootstrap<F>(values: &[f64], resamples: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if resamples < 2 || values.is_empty() {
        return f64::NAN;
    }
    let stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let sample: Vec<f64> = (0..values.len()).map(|_| values[rng.random_range(0..values.len())]).collect();
            stat(&sample)
        })
        .collect();
    mean_var(&stats).1.sqrt()
}

/// Mean and unbiased variance.
pub(crate) fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() < 2 { 0.0 } else { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) };
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotStatistics {
    pub n_shots: usize,
    pub mean: f64,
    pub variance: f64,
    /// Bootstrap standard errors.
    pub se_mean: f64,
    pub se_variance: f64,
}

/// Mean and variance of the measured collective value with bootstrap errors.
pub fn shot_statistics(shots: &ShotSet, resamples: usize) -> Result<ShotStatistics> {
    if shots.n_shots() < 2 {
        return Err(Error::InvalidParameter("need at least two shots".into()));
    }
    let values = shots.collective_values();
    let (mean, variance) = mean_var(&values);
    Ok(ShotStatistics {
        n_shots: values.len(),
        mean,
        variance,
        se_mean: bootstrap(&values, resamples, BOOTSTRAP_SEED, |s| mean_var(s).0),
        se_variance: bootstrap(&values, resamples, BOOTSTRAP_SEED ^ 1, |s| mean_var(s).1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotSqueezing {
    pub mean_spin: f64,
    pub min_var: f64,
    pub xi2: f64,
    /// Propagated from the bootstrap errors of both shot sets.
    pub se_xi2: f64,
}

/// `xi^2` from a spin-length set and a variance set at the squeezing angle.
pub fn shot_squeezing(spin_length: &ShotStatistics, variance: &ShotStatistics, n_atoms: usize) -> ShotSqueezing {
    let m = spin_length.mean.abs();
    let v = variance.variance;
    let xi2 = n_atoms as f64 * v / (m * m);
    let rel = ((variance.se_variance / v).powi(2) + (2.0 * spin_length.se_mean / m).powi(2)).sqrt();
    ShotSqueezing { mean_spin: m, min_var: v, xi2, se_xi2: xi2 * rel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{evolve, KrylovParams};
    use crate::lattice::LatticeSpec;
    use crate::measurement::{var_along, MomentSummary};
    use crate::operators::{collective_expectations, Hamiltonian};
    use crate::protocols::prepare_coherent_y;
    use rand_distr::{Distribution, Normal};

    fn evolved_2x3() -> StateVector {
        let h = Hamiltonian::Xy { j_mhz: 0.25, couplings: LatticeSpec::square(2, 3, 15.0).coupling_matrix().unwrap() };
        evolve(&h, &prepare_coherent_y(6), 0.4, &KrylovParams::default()).unwrap()
    }

    #[test]
    fn all_up_reads_plus_one() {
        let s = sample_shots(&StateVector::all_up(5), Readout::Variance { theta: 0.0 }, 50, 1).unwrap();
        assert!(s.rows().all(|r| r.iter().all(|&x| x == 1)));
    }

    #[test]
    fn spin_length_of_coherent_state() {
        let s = sample_shots(&prepare_coherent_y(7), Readout::SpinLength, 40, 2).unwrap();
        assert!(s.collective_values().iter().all(|&j| (j - 3.5).abs() < 1e-12));
    }

    #[test]
    fn coherent_variance_is_binomial() {
        let n = 9;
        let shots = sample_shots(&prepare_coherent_y(n), Readout::Variance { theta: 0.0 }, 100_000, 3).unwrap();
        let st = shot_statistics(&shots, 50).unwrap();
        let exact = n as f64 / 4.0;
        // Var of sample variance for a binomial-like sum: (mu4 - sigma^4 (n-3)/(n-1))/n
        let mu4 = 3.0 * exact * exact - n as f64 / 8.0;
        let se = ((mu4 - exact * exact) / 100_000.0).sqrt();
        assert!((st.variance - exact).abs() < 3.0 * se, "{} vs {exact}", st.variance);
        assert!(st.mean.abs() < 3.0 * (exact / 1e5).sqrt());
    }

    #[test]
    fn shot_variance_converges_to_exact() {
        let v = evolved_2x3();
        let m = MomentSummary::from(&collective_expectations(&v).unwrap());
        let theta = 0.7;
        let exact = var_along(&m, theta);
        let mut last = f64::INFINITY;
        for (k, shots) in [1_000, 10_000, 100_000].into_iter().enumerate() {
            // average deviation over a few seeds keeps the shrinking trend robust
            let dev: f64 = (0..4)
                .map(|s| {
                    let set = sample_shots(&v, Readout::Variance { theta }, shots, 10 * k as u64 + s).unwrap();
                    (mean_var(&set.collective_values()).1 - exact).abs()
                })
                .sum::<f64>()
                / 4.0;
            assert!(dev < 4.0 / (shots as f64).sqrt() * exact);
            assert!(dev < last);
            last = dev;
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let v = evolved_2x3();
        let a = sample_shots(&v, Readout::Variance { theta: 0.3 }, 500, 9).unwrap();
        let b = sample_shots(&v, Readout::Variance { theta: 0.3 }, 500, 9).unwrap();
        let c = sample_shots(&v, Readout::Variance { theta: 0.3 }, 500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.outcomes, c.outcomes);
        // a prefix of a longer run is the shorter run
        let long = sample_shots(&v, Readout::Variance { theta: 0.3 }, 800, 9).unwrap();
        assert_eq!(&long.outcomes[..a.outcomes.len()], &a.outcomes[..]);
    }

    #[test]
    fn constant_and_two_shot_statistics() {
        let meta = ShotMeta::default();
        let s = ShotSet::from_rows(vec![vec![1, -1, 1]; 10], meta).unwrap();
        assert_eq!(shot_statistics(&s, 20).unwrap().variance, 0.0);
        let n = 4;
        let s = ShotSet::from_rows(vec![vec![1; n], vec![-1; n]], meta).unwrap();
        let st = shot_statistics(&s, 20).unwrap();
        assert!((st.variance - (n * n) as f64 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_matches_gaussian_se() {
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
        let se = bootstrap(&x, 400, 7, |s| mean_var(s).1);
        let analytic = 4.0 * (2.0 / 1999.0f64).sqrt();
        assert!((se / analytic - 1.0).abs() < 0.2, "{se} vs {analytic}");
        let se_mean = bootstrap(&x, 400, 8, |s| mean_var(s).0);
        assert!((se_mean / (2.0 / 2000f64.sqrt()) - 1.0).abs() < 0.2);
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shots.csv");
        let s = sample_shots(&evolved_2x3(), Readout::Variance { theta: 0.1 }, 30, 5).unwrap();
        s.write_csv(&path).unwrap();
        let back = ShotSet::read_csv(&path, s.meta).unwrap();
        assert_eq!(back, s);

        std::fs::write(&path, "1,-1\n1,0\n").unwrap();
        assert!(ShotSet::read_csv(&path, ShotMeta::default()).is_err());
        std::fs::write(&path, "1,-1\n1\n").unwrap();
        assert!(ShotSet::read_csv(&path, ShotMeta::default()).is_err());
    }

    #[test]
    fn up_columns_shift_the_mean() {
        let s = ShotSet::from_rows(vec![vec![-1, -1]; 3], ShotMeta::default()).unwrap();
        let t = s.with_up_columns(2);
        assert_eq!(t.n_atoms(), 4);
        assert!(t.collective_values().iter().all(|&j| j == 0.0));
    }
}
