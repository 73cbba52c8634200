//! Preparation and detection imperfections: STIRAP holes, readout bit-flips,
//! and the first-order correction that undoes the latter.
//!
//! Detection quantities live in the readout frame: `mean` is the average of
//! the measured `J_z` after the analysis pulse. For spin-length readout that
//! is `-<J_y>`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::measurement::{var_along, MomentSummary, Readout, ShotSet, ShotStatistics};

/// Stream offset separating detection flips from shot sampling.
const FLIP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const HOLE_SALT: u64 = 0xd1b5_4a32_d192_ed03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModel {
    /// Probability an atom is never excited and sits out the dynamics.
    pub eta: f64,
    /// Probability an up spin is read as down.
    pub eps_up: f64,
    /// Probability a down spin is read as up.
    pub eps_down: f64,
    pub seed: u64,
    /// Over-rotation of analysis pulses (radians).
    pub analysis_bias: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self { eta: 0.02, eps_up: 0.025, eps_down: 0.010, seed: 0, analysis_bias: 0.0 }
    }
}

impl ErrorModel {
    pub fn ideal() -> Self {
        Self { eta: 0.0, eps_up: 0.0, eps_down: 0.0, seed: 0, analysis_bias: 0.0 }
    }

    pub fn detection_only(eps_up: f64, eps_down: f64) -> Self {
        Self { eta: 0.0, eps_up, eps_down, ..Self::ideal() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("eta", self.eta), ("eps_up", self.eps_up), ("eps_down", self.eps_down)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} outside [0, 1)")));
            }
        }
        if self.eps_up + self.eps_down >= 0.5 {
            return Err(Error::InvalidParameter("eps_up + eps_down must stay below 1/2".into()));
        }
        if !self.analysis_bias.is_finite() {
            return Err(Error::InvalidParameter("analysis bias must be finite".into()));
        }
        Ok(())
    }

    pub fn has_detection_errors(&self) -> bool {
        self.eps_up > 0.0 || self.eps_down > 0.0
    }
}

/// One draw of STIRAP failures on top of an assembled array.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleRealization {
    /// Lattice with the failed sites added to its holes.
    pub spec: LatticeSpec,
    /// Indices (in the full grid) of atoms that failed.
    pub failed: Vec<usize>,
    /// Atoms imaged at readout, interacting or not.
    pub n_imaged: usize,
}

impl HoleRealization {
    pub fn n_holes(&self) -> usize {
        self.failed.len()
    }

    pub fn n_interacting(&self) -> usize {
        self.n_imaged - self.failed.len()
    }
}

/// Mark each present atom as failed with probability `eta`. Realization `r`
/// uses its own random stream.
pub fn apply_stirap_holes(spec: &LatticeSpec, em: &ErrorModel, realization: u64) -> HoleRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(em.seed ^ HOLE_SALT);
    rng.set_stream(realization);
    let present = spec.occupied_sites();
    let failed: Vec<usize> = present.iter().copied().filter(|_| rng.random::<f64>() < em.eta).collect();
    let out = spec.clone().with_holes(failed.iter().copied());
    HoleRealization { spec: out, failed, n_imaged: present.len() }
}

/// Flip `+1 -> -1` with `eps_up` and `-1 -> +1` with `eps_down`, shot by shot
/// from independent streams.
pub fn detection_forward_shots(shots: &ShotSet, em: &ErrorModel) -> ShotSet {
    let mut out = shots.clone();
    let seed = em.seed ^ FLIP_SALT ^ shots.meta.seed;
    let rows: Vec<&mut [i8]> = out.rows_mut().collect();
    rows.into_par_iter().enumerate().for_each(|(k, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        for x in row.iter_mut() {
            let u: f64 = rng.random();
            if (*x == 1 && u < em.eps_up) || (*x == -1 && u < em.eps_down) {
                *x = -*x;
            }
        }
    });
    out
}

/// Readout-frame mean under detection errors (exact for any state).
pub fn detection_forward_mean(mean_tilde: f64, n: usize, em: &ErrorModel) -> f64 {
    let half = n as f64 / 2.0;
    half * (em.eps_down - em.eps_up) + (1.0 - em.eps_down - em.eps_up) * mean_tilde
}

/// First-order map from error-free to measured `(mean, variance)`.
///
/// `mean_theta_tilde` is the error-free readout-frame mean of the variance
/// measurement; it weights which flips dominate the added noise.
pub fn detection_forward_moments(
    mean_tilde: f64,
    var_tilde: f64,
    mean_theta_tilde: f64,
    n: usize,
    em: &ErrorModel,
) -> (f64, f64) {
    let half = n as f64 / 2.0;
    let mean = detection_forward_mean(mean_tilde, n, em);
    let var = (1.0 - 2.0 * em.eps_down - 2.0 * em.eps_up) * var_tilde
        + em.eps_down * (half - mean_theta_tilde)
        + em.eps_up * (half + mean_theta_tilde);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InverseMode {
    /// Invert the mean of the variance measurement as well.
    #[default]
    Exact,
    /// Drop the `<J_theta>` term, valid when it is far below `N/2`.
    NeglectMeanTheta,
}

/// Undo [`detection_forward_moments`]; returns `(mean_tilde, var_tilde)`.
pub fn detection_inverse(
    mean: f64,
    var: f64,
    mean_theta: f64,
    n: usize,
    em: &ErrorModel,
    mode: InverseMode,
) -> Result<(f64, f64)> {
    let a = 1.0 - em.eps_down - em.eps_up;
    let b = 1.0 - 2.0 * em.eps_down - 2.0 * em.eps_up;
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::NotInvertible);
    }
    let half = n as f64 / 2.0;
    let invert_mean = |m: f64| (m - half * (em.eps_down - em.eps_up)) / a;
    let mt = match mode {
        InverseMode::Exact => invert_mean(mean_theta),
        InverseMode::NeglectMeanTheta => 0.0,
    };
    let var_tilde = (var - em.eps_down * (half - mt) - em.eps_up * (half + mt)) / b;
    Ok((invert_mean(mean), var_tilde))
}

/// Squeezing from shot statistics, raw and detection-corrected side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedSqueezing {
    pub n_atoms: usize,
    pub mean_spin_raw: f64,
    pub var_raw: f64,
    pub xi2_raw: f64,
    pub mean_spin_corrected: f64,
    pub var_corrected: f64,
    pub xi2_corrected: f64,
}

/// Apply the inverse map to a spin-length and a variance measurement.
pub fn correct_squeezing(
    spin_length: &ShotStatistics,
    variance: &ShotStatistics,
    n: usize,
    em: &ErrorModel,
    mode: InverseMode,
) -> Result<CorrectedSqueezing> {
    // statistics carry the readout sign; the error map wants raw J_z
    let mean_raw = Readout::SpinLength.sign() * spin_length.mean;
    correct_readout_moments(mean_raw, variance.variance, variance.mean, n, em, mode)
}

/// As [`correct_squeezing`] for readout-frame moments.
pub fn correct_readout_moments(
    mean_raw: f64,
    var_raw: f64,
    mean_theta_raw: f64,
    n: usize,
    em: &ErrorModel,
    mode: InverseMode,
) -> Result<CorrectedSqueezing> {
    let (mean_c, var_c) = detection_inverse(mean_raw, var_raw, mean_theta_raw, n, em, mode)?;
    let xi2 = |v: f64, m: f64| n as f64 * v / (m * m);
    Ok(CorrectedSqueezing {
        n_atoms: n,
        mean_spin_raw: mean_raw.abs(),
        var_raw,
        xi2_raw: xi2(var_raw, mean_raw),
        mean_spin_corrected: mean_c.abs(),
        var_corrected: var_c,
        xi2_corrected: xi2(var_c, mean_c),
    })
}

/// Readout-frame moments of an ensemble of hole realizations.
///
/// Each entry is the interacting-atom moment summary and the number of holes,
/// which read as up in every shot. Equal weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutMoments {
    pub n_imaged: usize,
    /// Average measured `J_z` after the spin-length pulse.
    pub spin_length_mean: f64,
    pub theta: f64,
    /// Average and variance of measured `J_z` after the variance pulse.
    pub mean_theta: f64,
    pub var_theta: f64,
}

impl ReadoutMoments {
    /// Mix realizations and read out along `theta`.
    pub fn mix(realizations: &[(MomentSummary, usize)], n_imaged: usize, theta: f64) -> Self {
        let r = realizations.len() as f64;
        let (s, c) = theta.sin_cos();
        let (mut mean_len, mut mean_th, mut second_th) = (0.0, 0.0, 0.0);
        for (m, holes) in realizations {
            let h = *holes as f64 / 2.0;
            mean_len += -m.mean_y + h;
            let mt = c * m.mean_z + s * m.mean_x + h;
            mean_th += mt;
            second_th += var_along(m, theta) + mt * mt;
        }
        let (mean_len, mean_th, second_th) = (mean_len / r, mean_th / r, second_th / r);
        Self {
            n_imaged,
            spin_length_mean: mean_len,
            theta,
            mean_theta: mean_th,
            var_theta: second_th - mean_th * mean_th,
        }
    }

    /// Apply the first-order detection map.
    pub fn with_detection(&self, em: &ErrorModel) -> Self {
        let n = self.n_imaged;
        let (_, var) = detection_forward_moments(0.0, self.var_theta, self.mean_theta, n, em);
        Self {
            spin_length_mean: detection_forward_mean(self.spin_length_mean, n, em),
            mean_theta: detection_forward_mean(self.mean_theta, n, em),
            var_theta: var,
            ..*self
        }
    }

    pub fn xi2(&self) -> f64 {
        self.n_imaged as f64 * self.var_theta / (self.spin_length_mean * self.spin_length_mean)
    }
}

/// Equal-weight mixture of moment summaries (internal frame).
pub fn mix_moments(parts: &[MomentSummary]) -> MomentSummary {
    let r = parts.len() as f64;
    let avg = |f: &dyn Fn(&MomentSummary) -> f64| parts.iter().map(f).sum::<f64>() / r;
    let (mx, my, mz) = (avg(&|m| m.mean_x), avg(&|m| m.mean_y), avg(&|m| m.mean_z));
    MomentSummary {
        mean_x: mx,
        mean_y: my,
        mean_z: mz,
        var_x: avg(&|m| m.var_x + m.mean_x * m.mean_x) - mx * mx,
        var_z: avg(&|m| m.var_z + m.mean_z * m.mean_z) - mz * mz,
        cov_xz: avg(&|m| m.cov_xz + m.mean_x * m.mean_z) - mx * mz,
    }
}
