//! TOML run configuration. Every section is optional; a file holding only
//! `version = 1` runs the default 4x4 array.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::{ErrorModel, InverseMode};
use crate::krylov::KrylovParams;
use crate::lattice::LatticeSpec;
use crate::protocols::{PulseModel, Step};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_j")]
    pub j_mhz: f64,
    #[serde(default = "default_lattice")]
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub time: TimeGrid,
    /// Shots per readout and time point; 0 keeps exact moments only.
    #[serde(default = "default_shots")]
    pub shots: usize,
    /// Hole realizations averaged when `errors.eta > 0`.
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub errors: ErrorModel,
    #[serde(default)]
    pub krylov: KrylovParams,
    /// Shape of the preparation pulse.
    #[serde(default)]
    pub preparation: PulseModel,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub floquet: FloquetConfig,
    #[serde(default)]
    pub multistep: MultistepConfig,
    #[serde(default)]
    pub oat: OatConfig,
    #[serde(default)]
    pub sm: SmConfig,
    #[serde(default)]
    pub semiclassical: SemiclassicalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_j() -> f64 {
    0.25
}

fn default_lattice() -> LatticeSpec {
    LatticeSpec::square(4, 4, 15.0)
}

fn default_shots() -> usize {
    200
}

fn default_realizations() -> usize {
    8
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            j_mhz: default_j(),
            lattice: default_lattice(),
            time: TimeGrid::default(),
            shots: default_shots(),
            realizations: default_realizations(),
            errors: ErrorModel::default(),
            krylov: KrylovParams::default(),
            preparation: PulseModel::default(),
            protocol: ProtocolConfig::default(),
            analysis: AnalysisConfig::default(),
            scaling: ScalingConfig::default(),
            floquet: FloquetConfig::default(),
            multistep: MultistepConfig::default(),
            oat: OatConfig::default(),
            sm: SmConfig::default(),
            semiclassical: SemiclassicalConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Ideal-model copy: no holes, no readout errors.
    pub fn ideal(&self) -> Self {
        Self { errors: ErrorModel { seed: self.errors.seed, ..ErrorModel::ideal() }, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !(self.j_mhz > 0.0 && self.j_mhz.is_finite()) {
            return Err(Error::Config(format!("j_mhz must be positive, got {}", self.j_mhz)));
        }
        self.lattice.validate().map_err(cfg)?;
        self.time.times()?;
        self.errors.validate().map_err(cfg)?;
        self.krylov.validate().map_err(cfg)?;
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.shots == 1 {
            return Err(Error::Config("shots must be 0 (exact) or at least 2".into()));
        }
        if self.analysis.theta_points < 4 {
            return Err(Error::Config("theta scan needs at least 4 angles".into()));
        }
        if self.scaling.sizes.len() < 3 || self.oat.sizes.len() < 3 {
            return Err(Error::Config("scaling sweeps need at least 3 sizes".into()));
        }
        if !(self.floquet.period_us > 0.0) || !(self.oat.chi_n_mhz > 0.0) {
            return Err(Error::Config("Floquet period and OAT chi*N must be positive".into()));
        }
        if self.sm.ks.iter().any(|&k| k == 0 || k > crate::measurement::MAX_SM_K) || self.sm.points < 2 {
            return Err(Error::Config("SM depths must lie in 1..=64 with at least 2 points".into()));
        }
        let sc = &self.semiclassical;
        if sc.n_atoms == 0 || sc.n_points < 100 || !(sc.m_xy > 0.0 && sc.m_xy <= 1.0) {
            return Err(Error::Config("semiclassical needs atoms, >= 100 points and 0 < m_xy <= 1".into()));
        }
        sc.time.times()?;
        Ok(())
    }
}

/// Uniform grid `start, start + step, ...` up to `stop`, or explicit points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub start_us: f64,
    pub stop_us: f64,
    pub step_us: f64,
    pub points_us: Option<Vec<f64>>,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { start_us: 0.0, stop_us: 1.0, step_us: 0.05, points_us: None }
    }
}

impl TimeGrid {
    pub fn uniform(start_us: f64, stop_us: f64, step_us: f64) -> Self {
        Self { start_us, stop_us, step_us, points_us: None }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        let t = match &self.points_us {
            Some(p) => p.clone(),
            None => {
                if !(self.step_us > 0.0) || !(self.stop_us >= self.start_us) {
                    return Err(Error::Config("time grid needs step > 0 and stop >= start".into()));
                }
                let n = ((self.stop_us - self.start_us) / self.step_us + 1e-9).floor() as usize;
                (0..=n).map(|k| self.start_us + k as f64 * self.step_us).collect()
            }
        };
        if t.is_empty() || t.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("time grid must be nonempty and nonnegative".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("time grid must be strictly increasing".into()));
        }
        Ok(t)
    }
}

/// Schedule used by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolConfig {
    #[default]
    Standard,
    Multistep {
        #[serde(default = "default_t_rotate")]
        t_rotate_us: f64,
        /// Rotation about `y`; defaults to the semiclassical alignment angle.
        #[serde(default)]
        angle_rad: Option<f64>,
    },
    Floquet {
        t_start_us: f64,
        n_cycles: usize,
        #[serde(default = "default_period")]
        period_us: f64,
        #[serde(default)]
        pulse_model: PulseModel,
    },
    /// Steps run as given; the schedule is padded with XY evolution up to the last time.
    Custom { steps: Vec<Step> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Half-width (grid points) of the parabolic-fit window.
    pub fit_window: usize,
    pub theta_points: usize,
    /// Time of the theta scan; the ideal optimum when unset.
    pub theta_scan_t_us: Option<f64>,
    pub bootstrap: usize,
    pub inverse_mode: InverseMode,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fit_window: super::fit::DEFAULT_FIT_WINDOW,
            theta_points: 16,
            theta_scan_t_us: None,
            bootstrap: 200,
            inverse_mode: InverseMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    /// `[rows, cols]` per array.
    pub sizes: Vec<[usize; 2]>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { sizes: vec![[2, 2], [3, 3], [4, 4]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetConfig {
    pub period_us: f64,
    pub cycles: Vec<usize>,
    /// Start of the first cycle; the ideal optimum when unset.
    pub t_start_us: Option<f64>,
    pub pulse_model: PulseModel,
    /// Also run the average Hamiltonian in place of the cycles.
    pub reference: bool,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self {
            period_us: default_period(),
            cycles: vec![0, 1, 2, 3],
            t_start_us: None,
            pulse_model: PulseModel::default(),
            reference: true,
        }
    }
}

fn default_period() -> f64 {
    0.36
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultistepConfig {
    pub t_rotate_us: f64,
    pub angle_rad: Option<f64>,
}

impl Default for MultistepConfig {
    fn default() -> Self {
        Self { t_rotate_us: default_t_rotate(), angle_rad: None }
    }
}

fn default_t_rotate() -> f64 {
    0.13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OatConfig {
    pub sizes: Vec<usize>,
    /// `chi * N` held fixed across the sweep (MHz).
    pub chi_n_mhz: f64,
}

impl Default for OatConfig {
    fn default() -> Self {
        // chi * N of the 4x4 array at 15 um and J = 0.25 MHz
        Self { sizes: vec![8, 16, 32, 64, 128, 256], chi_n_mhz: 1.19 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmConfig {
    pub ks: Vec<usize>,
    pub points: usize,
}

impl Default for SmConfig {
    fn default() -> Self {
        Self { ks: vec![1, 2, 3, 4, 6, 8, 16], points: 80 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemiclassicalConfig {
    pub n_atoms: usize,
    pub n_points: usize,
    pub m_xy: f64,
    /// Effective coupling (rad/us); matched to one-axis twisting when unset.
    pub j_tilde: Option<f64>,
    /// Twisting strength to match; `oat.chi_n_mhz / n_atoms` when unset.
    pub chi_mhz: Option<f64>,
    pub time: TimeGrid,
    /// Multi-step rotation time; 0.4 of the single-step optimum when unset.
    pub t_rotate_us: Option<f64>,
    /// Fraction of the full alignment rotation applied at `t_rotate_us`.
    pub alignment_fraction: f64,
    /// Times at which the point cloud is dumped.
    pub snapshots_us: Vec<f64>,
}

impl Default for SemiclassicalConfig {
    fn default() -> Self {
        Self {
            n_atoms: 400,
            n_points: 20_000,
            m_xy: 1.0,
            j_tilde: None,
            chi_mhz: None,
            time: TimeGrid::uniform(0.0, 8.0, 0.05),
            t_rotate_us: None,
            alignment_fraction: 0.5,
            snapshots_us: vec![0.0, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), svg: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = RunConfig::from_toml_str("version = 1").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.time.times().unwrap().len(), 21);
        assert_eq!(c.j_mhz, 0.25);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig {
            protocol: ProtocolConfig::Multistep { t_rotate_us: 0.2, angle_rad: Some(-0.5) },
            lattice: LatticeSpec::square(3, 3, 12.0).with_holes([4]),
            ..RunConfig::default()
        };
        let text = c.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn explicit_sections() {
        let c = RunConfig::from_toml_str(
            r#"
            version = 1
            seed = 7
            shots = 0
            [lattice]
            rows = 2
            cols = 3
            boundary = "periodic"
            [time]
            points_us = [0.0, 0.1, 0.3]
            [protocol]
            kind = "floquet"
            t_start_us = 0.1
            n_cycles = 2
            [errors]
            eta = 0.0
            "#,
        )
        .unwrap();
        assert_eq!(c.lattice.n_atoms(), 6);
        assert_eq!(c.time.times().unwrap(), vec![0.0, 0.1, 0.3]);
        assert!(matches!(c.protocol, ProtocolConfig::Floquet { n_cycles: 2, period_us, .. } if period_us == 0.36));
        assert_eq!(c.errors.eps_up, 0.025);
    }

    #[test]
    fn config_errors() {
        for bad in [
            "version = 2",
            "seed = 1",
            "version = 1\nbogus = 3",
            "version = 1\nshots = 1",
            "version = 1\n[time]\npoints_us = [0.2, 0.1]",
            "version = 1\n[lattice]\nrows = 0\ncols = 2",
            "version = 1\n[errors]\neps_up = 0.4\neps_down = 0.2",
            "version = 1\n[scaling]\nsizes = [[2, 2], [3, 3]]",
        ] {
            assert!(matches!(RunConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn default_chi_n_matches_the_4x4_array() {
        let chi = LatticeSpec::square(4, 4, 15.0).coupling_matrix().unwrap().rotor_chi(0.25).unwrap();
        assert!((16.0 * chi / OatConfig::default().chi_n_mhz - 1.0).abs() < 0.01, "{}", 16.0 * chi);
    }
}
