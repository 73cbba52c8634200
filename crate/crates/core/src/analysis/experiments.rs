//! Experiment pipelines behind the CLI subcommands. Every pipeline is a pure
//! function of its [`RunConfig`]; parallel jobs are collected in input order
//! so outputs do not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ProtocolConfig, RunConfig};
use super::fit::{
    extract_optimum, extract_optimum_points, fit_power_law, fit_sinusoid, theta_grid, Optimum, SinusoidFit,
};
use crate::error::{Error, Result};
use crate::error_models::{
    apply_stirap_holes, correct_readout_moments, correct_squeezing, detection_forward_moments, detection_forward_shots,
    mix_moments, ErrorModel, ReadoutMoments,
};
use crate::krylov::{evolve, KrylovParams};
use crate::lattice::LatticeSpec;
use crate::measurement::{
    quantum_bound, sample_shots_biased, shot_squeezing, shot_statistics, sm_depth_bound, theta_star, to_db, var_along,
    MomentSummary, Readout, ShotMeta, ShotSet, SmCurve, SqueezingRecord,
};
use crate::operators::collective_expectations;
use crate::protocols::{apply_pulse, run_schedule, Interaction, ProtocolSchedule, Pulse, SpinModel, Step, WahuhaCycle};
use crate::rotor::oat_optimum;
use crate::semiclassical::{
    matched_j_tilde, oat_alignment_angle, sc_evolve, sc_rotate, sc_squeezing, ClassicalEnsemble, ClassicalSqueezing,
};
use crate::state::StateVector;

/// Experimental exponents reported for the dipolar arrays, kept for annotation.
pub const REFERENCE_NU: Exponent = Exponent { value: 0.18, se: 0.02 };
pub const REFERENCE_MU: Exponent = Exponent { value: 0.32, se: 0.03 };

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of a sub-task identified by `tags`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(base), |s, &t| splitmix(s ^ splitmix(t)))
}

pub fn spin_model(lattice: &LatticeSpec, j_mhz: f64) -> Result<SpinModel> {
    Ok(SpinModel::new(lattice.coupling_matrix()?, j_mhz))
}

/// Coherent state along `+y` made by the configured preparation pulse.
pub fn initial_state(model: &SpinModel, cfg: &RunConfig, params: &KrylovParams) -> Result<StateVector> {
    let n = model.n_spins();
    let pulse = Pulse::preparation().with_model(cfg.preparation);
    let h = match cfg.preparation {
        crate::protocols::PulseModel::Finite { interactions: true, .. } => Some(model.hamiltonian(Interaction::Xy)?),
        _ => None,
    };
    apply_pulse(&pulse, &StateVector::all_up(n), h.as_ref(), params)
}

/// Alignment rotation from the semiclassical model of the array.
pub fn semiclassical_rotation(model: &SpinModel, t_rotate_us: f64) -> Result<f64> {
    let chi = model.couplings.rotor_chi(model.j_mhz)?;
    Ok(oat_alignment_angle(model.n_spins(), chi, t_rotate_us))
}

/// Schedule of `protocol` lasting `total_us`.
pub fn build_schedule(protocol: &ProtocolConfig, model: &SpinModel, total_us: f64) -> Result<ProtocolSchedule> {
    Ok(match protocol {
        ProtocolConfig::Standard => ProtocolSchedule::standard(total_us),
        ProtocolConfig::Multistep { t_rotate_us, angle_rad } => {
            let angle = match angle_rad {
                Some(a) => *a,
                None => semiclassical_rotation(model, *t_rotate_us)?,
            };
            ProtocolSchedule::multistep(*t_rotate_us, angle, total_us)
        }
        ProtocolConfig::Floquet { t_start_us, n_cycles, period_us, pulse_model } => {
            ProtocolSchedule::floquet(*t_start_us, *n_cycles, &WahuhaCycle::new(*period_us, *pulse_model), total_us)?
        }
        ProtocolConfig::Custom { steps } => {
            let mut s = ProtocolSchedule::new(steps.clone());
            let rest = total_us - s.total_duration_us();
            if rest > 0.0 {
                s.steps.push(Step::free(rest));
            }
            s
        }
    })
}

fn summaries(states: &[StateVector]) -> Result<Vec<MomentSummary>> {
    states.par_iter().map(|v| Ok(MomentSummary::from(&collective_expectations(v)?))).collect()
}

/// States of the array at each time under `schedule`.
pub fn run_states(
    model: &SpinModel,
    schedule: &ProtocolSchedule,
    times: &[f64],
    cfg: &RunConfig,
) -> Result<Vec<StateVector>> {
    let v0 = initial_state(model, cfg, &cfg.krylov)?;
    run_schedule(schedule, model, &v0, times, &cfg.krylov)
}

/// Exact squeezing series of the ideal array under `protocol`.
pub fn exact_series(cfg: &RunConfig, protocol: &ProtocolConfig, times: &[f64]) -> Result<Vec<SqueezingRecord>> {
    let model = spin_model(&cfg.lattice, cfg.j_mhz)?;
    let total = *times.last().expect("nonempty grid");
    let schedule = build_schedule(protocol, &model, total)?;
    let m = summaries(&run_states(&model, &schedule, times, cfg)?)?;
    let n = model.n_spins();
    Ok(times.iter().zip(&m).map(|(&t, m)| SqueezingRecord::from_moments(t, n, m)).collect())
}

/// One row of the `simulate` table. `raw_*` and `corr_*` come from exact
/// moments passed through the detection model and its inverse; `shot_*` are
/// present when shots were sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub t_us: f64,
    pub n_atoms: usize,
    pub mean_spin: f64,
    pub theta_star: f64,
    pub min_var: f64,
    pub xi2: f64,
    pub xi2_db: f64,
    pub readout_theta: f64,
    /// Signed readout-frame means of the spin-length and variance measurements.
    pub raw_readout_mean: f64,
    pub raw_mean_theta: f64,
    pub raw_mean_spin: f64,
    pub raw_var: f64,
    pub raw_xi2: f64,
    pub raw_xi2_db: f64,
    pub corr_mean_spin: f64,
    pub corr_var: f64,
    pub corr_xi2: f64,
    pub corr_xi2_db: f64,
    pub shots: usize,
    pub shot_raw_mean_spin: Option<f64>,
    pub shot_raw_var: Option<f64>,
    pub shot_raw_xi2: Option<f64>,
    pub shot_raw_xi2_db: Option<f64>,
    pub shot_raw_xi2_se: Option<f64>,
    pub shot_corr_xi2: Option<f64>,
    pub shot_corr_xi2_db: Option<f64>,
    pub shot_corr_xi2_se: Option<f64>,
}

/// Optima of each `simulate` column; `None` where extraction failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptima {
    pub exact: Option<Optimum>,
    pub raw: Option<Optimum>,
    pub corrected: Option<Optimum>,
    pub shot_raw: Option<Optimum>,
    pub shot_corrected: Option<Optimum>,
    pub flags: Vec<String>,
}

/// Shots taken at one time point, after readout errors.
#[derive(Debug, Clone)]
pub struct ShotPair {
    pub t_us: f64,
    pub spin_length: ShotSet,
    pub variance: ShotSet,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub n_imaged: usize,
    pub rows: Vec<SimRow>,
    pub ideal: Vec<SqueezingRecord>,
    pub optima: SimOptima,
    /// Per-realization hole counts.
    pub holes: Vec<usize>,
    /// Shots at the grid point closest to the exact optimum.
    pub shots_at_optimum: Option<ShotPair>,
}

impl Simulation {
    /// `(N, xi2)` of every finite squeezing value in the table.
    pub fn all_xi2(&self) -> Vec<(usize, f64)> {
        let n = self.n_imaged;
        self.rows
            .iter()
            .flat_map(|r| {
                [Some(r.xi2), Some(r.raw_xi2), Some(r.corr_xi2), r.shot_raw_xi2, r.shot_corr_xi2]
                    .into_iter()
                    .flatten()
                    .map(move |x| (n, x))
            })
            .filter(|(_, x)| x.is_finite())
            .collect()
    }
}

struct Realization {
    holes: usize,
    moments: Vec<MomentSummary>,
    states: Option<Vec<StateVector>>,
    shots: usize,
}

fn optimum_of(label: &str, pts: &[(f64, f64)], window: usize, flags: &mut Vec<String>) -> Option<Optimum> {
    match extract_optimum_points(pts, window) {
        Ok(o) => {
            if o.fallback {
                flags.push(format!("{label}: parabola rejected, grid minimum reported"));
            }
            Some(o)
        }
        Err(e) => {
            flags.push(format!("{label}: {e}"));
            None
        }
    }
}

/// Time series of the configured protocol: exact ideal moments, the exact
/// detection-model readout of the hole ensemble with its correction, and
/// shot-sampled estimates when `shots > 0`.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let times = cfg.time.times()?;
    let total = *times.last().expect("nonempty grid");
    let em = cfg.errors;
    let model = spin_model(&cfg.lattice, cfg.j_mhz)?;
    let n_imaged = model.n_spins();
    let schedule = build_schedule(&cfg.protocol, &model, total)?;
    let need_states = cfg.shots > 0;

    let ideal_states = run_states(&model, &schedule, &times, cfg)?;
    let ideal_m = summaries(&ideal_states)?;
    let ideal: Vec<SqueezingRecord> =
        times.iter().zip(&ideal_m).map(|(&t, m)| SqueezingRecord::from_moments(t, n_imaged, m)).collect();

    let n_real = if em.eta > 0.0 { cfg.realizations } else { 1 };
    let shots_of = |r: usize| cfg.shots / n_real + usize::from(r < cfg.shots % n_real);
    let realizations: Vec<Realization> = if em.eta > 0.0 {
        (0..n_real)
            .into_par_iter()
            .map(|r| {
                let hr = apply_stirap_holes(&cfg.lattice, &em, r as u64);
                let shots = shots_of(r);
                if hr.n_interacting() == 0 {
                    let zero =
                        MomentSummary { mean_x: 0.0, mean_y: 0.0, mean_z: 0.0, var_x: 0.0, var_z: 0.0, cov_xz: 0.0 };
                    return Ok(Realization {
                        holes: hr.n_holes(),
                        moments: vec![zero; times.len()],
                        states: None,
                        shots,
                    });
                }
                let m = spin_model(&hr.spec, cfg.j_mhz)?;
                let sched = build_schedule(&cfg.protocol, &m, total)?;
                let states = run_states(&m, &sched, &times, cfg)?;
                let moments = summaries(&states)?;
                Ok(Realization {
                    holes: hr.n_holes(),
                    moments,
                    states: (need_states && shots > 0).then_some(states),
                    shots,
                })
            })
            .collect::<Result<_>>()?
    } else {
        vec![Realization {
            holes: 0,
            moments: ideal_m.clone(),
            states: need_states.then_some(ideal_states),
            shots: cfg.shots,
        }]
    };

    let mut rows = Vec::with_capacity(times.len());
    let mut shot_sets = Vec::new();
    for (ti, (&t, rec)) in times.iter().zip(&ideal).enumerate() {
        let parts: Vec<MomentSummary> = realizations.iter().map(|r| r.moments[ti]).collect();
        let theta = theta_star(&mix_moments(&parts)).theta;
        let with_holes: Vec<(MomentSummary, usize)> = realizations.iter().map(|r| (r.moments[ti], r.holes)).collect();
        let raw = ReadoutMoments::mix(&with_holes, n_imaged, theta).with_detection(&em);
        let corr = correct_readout_moments(
            raw.spin_length_mean,
            raw.var_theta,
            raw.mean_theta,
            n_imaged,
            &em,
            cfg.analysis.inverse_mode,
        )?;

        let mut row = SimRow {
            t_us: t,
            n_atoms: rec.n_atoms,
            mean_spin: rec.mean_spin,
            theta_star: rec.theta_star,
            min_var: rec.min_var,
            xi2: rec.xi2,
            xi2_db: rec.xi2_db,
            readout_theta: theta,
            raw_readout_mean: raw.spin_length_mean,
            raw_mean_theta: raw.mean_theta,
            raw_mean_spin: corr.mean_spin_raw,
            raw_var: corr.var_raw,
            raw_xi2: corr.xi2_raw,
            raw_xi2_db: to_db(corr.xi2_raw),
            corr_mean_spin: corr.mean_spin_corrected,
            corr_var: corr.var_corrected,
            corr_xi2: corr.xi2_corrected,
            corr_xi2_db: to_db(corr.xi2_corrected),
            shots: cfg.shots,
            shot_raw_mean_spin: None,
            shot_raw_var: None,
            shot_raw_xi2: None,
            shot_raw_xi2_db: None,
            shot_raw_xi2_se: None,
            shot_corr_xi2: None,
            shot_corr_xi2_db: None,
            shot_corr_xi2_se: None,
        };
        if need_states {
            let pair = sample_pair(cfg, &realizations, ti, t, theta, n_imaged)?;
            let sl = shot_statistics(&pair.spin_length, cfg.analysis.bootstrap)?;
            let vs = shot_statistics(&pair.variance, cfg.analysis.bootstrap)?;
            let sq = shot_squeezing(&sl, &vs, n_imaged);
            let c = correct_squeezing(&sl, &vs, n_imaged, &em, cfg.analysis.inverse_mode)?;
            let rel = sq.se_xi2 / sq.xi2;
            row.shot_raw_mean_spin = Some(sq.mean_spin);
            row.shot_raw_var = Some(sq.min_var);
            row.shot_raw_xi2 = Some(sq.xi2);
            row.shot_raw_xi2_db = Some(to_db(sq.xi2));
            row.shot_raw_xi2_se = Some(sq.se_xi2);
            row.shot_corr_xi2 = Some(c.xi2_corrected);
            row.shot_corr_xi2_db = Some(to_db(c.xi2_corrected));
            row.shot_corr_xi2_se = Some(rel * c.xi2_corrected.abs());
            shot_sets.push(pair);
        }
        rows.push(row);
    }

    let w = cfg.analysis.fit_window;
    let mut optima = SimOptima::default();
    let col = |f: &dyn Fn(&SimRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.t_us, f(r).unwrap_or(f64::NAN))).collect()
    };
    optima.exact = optimum_of("exact", &col(&|r| Some(r.xi2)), w, &mut optima.flags);
    optima.raw = optimum_of("raw", &col(&|r| Some(r.raw_xi2)), w, &mut optima.flags);
    optima.corrected = optimum_of("corrected", &col(&|r| Some(r.corr_xi2)), w, &mut optima.flags);
    if need_states {
        optima.shot_raw = optimum_of("shot_raw", &col(&|r| r.shot_raw_xi2), w, &mut optima.flags);
        optima.shot_corrected = optimum_of("shot_corrected", &col(&|r| r.shot_corr_xi2), w, &mut optima.flags);
    }
    let shots_at_optimum = optima.exact.and_then(|o| {
        let i = times.iter().enumerate().min_by(|a, b| (a.1 - o.t_us).abs().total_cmp(&(b.1 - o.t_us).abs()))?.0;
        shot_sets.get(i).cloned()
    });
    Ok(Simulation {
        n_imaged,
        rows,
        ideal,
        optima,
        holes: realizations.iter().map(|r| r.holes).collect(),
        shots_at_optimum,
    })
}

/// Spin-length and variance shots at time index `ti` pooled over realizations.
fn sample_pair(
    cfg: &RunConfig,
    parts: &[Realization],
    ti: usize,
    t: f64,
    theta: f64,
    n_imaged: usize,
) -> Result<ShotPair> {
    let em = &cfg.errors;
    let mut sets = [Vec::new(), Vec::new()];
    for (r, part) in parts.iter().enumerate().filter(|(_, p)| p.shots > 0) {
        for (k, readout) in [Readout::SpinLength, Readout::Variance { theta }].into_iter().enumerate() {
            let meta = ShotMeta { readout: Some(readout), t_us: t, seed: 0 };
            let s = match &part.states {
                Some(states) => {
                    let seed = derive_seed(cfg.seed, &[1, ti as u64, r as u64, k as u64]);
                    sample_shots_biased(&states[ti], readout, em.analysis_bias, part.shots, seed)?
                }
                None => ShotSet::empty(part.shots, meta),
            };
            let mut s = s.with_up_columns(part.holes);
            s.meta = meta;
            sets[k].push(s);
        }
    }
    let mut out = sets.iter().enumerate().map(|(k, parts)| {
        let readout = if k == 0 { Readout::SpinLength } else { Readout::Variance { theta } };
        let meta = ShotMeta { readout: Some(readout), t_us: t, seed: derive_seed(cfg.seed, &[2, ti as u64, k as u64]) };
        let s = ShotSet::concat(parts, meta)?;
        debug_assert_eq!(s.n_atoms(), n_imaged);
        Ok::<_, Error>(if em.has_detection_errors() { detection_forward_shots(&s, em) } else { s })
    });
    let spin_length = out.next().expect("two readouts")?;
    let variance = out.next().expect("two readouts")?;
    Ok(ShotPair { t_us: t, spin_length, variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub theta: f64,
    pub var: f64,
    pub se: f64,
    /// `4 Var / N`
    pub var_norm: f64,
    /// Uncorrelated reference `4 Var / N = 1`.
    pub reference: f64,
    pub exact_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaScan {
    pub t_us: f64,
    pub n_atoms: usize,
    pub rows: Vec<ThetaRow>,
    pub fit: SinusoidFit,
    pub exact_theta_star: f64,
}

/// Variance along each angle of an `n`-point grid at `t_us` (the ideal
/// optimum when `None`). Shots include readout flips; holes are not drawn.
pub fn theta_scan(cfg: &RunConfig, t_us: Option<f64>) -> Result<ThetaScan> {
    cfg.validate()?;
    let t = match t_us.or(cfg.analysis.theta_scan_t_us) {
        Some(t) => t,
        None => {
            let recs = exact_series(cfg, &cfg.protocol, &cfg.time.times()?)?;
            extract_optimum(&recs, cfg.analysis.fit_window)?.t_us
        }
    };
    let model = spin_model(&cfg.lattice, cfg.j_mhz)?;
    let schedule = build_schedule(&cfg.protocol, &model, t)?;
    let v = run_states(&model, &schedule, &[t], cfg)?.pop().expect("one checkpoint");
    let m = MomentSummary::from(&collective_expectations(&v)?);
    let n = model.n_spins();
    let em = cfg.errors;
    let grid = theta_grid(cfg.analysis.theta_points);
    let rows: Vec<ThetaRow> = grid
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let exact_var = var_along(&m, theta);
            let (var, se) = if cfg.shots > 0 {
                let readout = Readout::Variance { theta };
                let s = sample_shots_biased(
                    &v,
                    readout,
                    em.analysis_bias,
                    cfg.shots,
                    derive_seed(cfg.seed, &[3, k as u64]),
                )?;
                let mut s = s;
                s.meta.seed = derive_seed(cfg.seed, &[4, k as u64]);
                let s = if em.has_detection_errors() { detection_forward_shots(&s, &em) } else { s };
                let st = shot_statistics(&s, cfg.analysis.bootstrap)?;
                (st.variance, st.se_variance)
            } else {
                let (s, c) = theta.sin_cos();
                (detection_forward_moments(0.0, exact_var, c * m.mean_z + s * m.mean_x, n, &em).1, 0.0)
            };
            Ok(ThetaRow { theta, var, se, var_norm: 4.0 * var / n as f64, reference: 1.0, exact_var })
        })
        .collect::<Result<_>>()?;
    let fit = fit_sinusoid(&grid, &rows.iter().map(|r| r.var).collect::<Vec<_>>())?;
    Ok(ThetaScan { t_us: t, n_atoms: n, rows, fit, exact_theta_star: theta_star(&m).theta })
}

/// How long `xi2` stays below 1 from the start, with linear interpolation
/// of the crossing. `censored` when it never comes back up.
pub fn squeezed_duration(records: &[SqueezingRecord]) -> (f64, bool) {
    let Some(first) = records.first() else { return (0.0, false) };
    let mut prev = first;
    for r in &records[1..] {
        if !(r.xi2 < 1.0) {
            if !(prev.xi2 < 1.0) {
                return (prev.t_us - first.t_us, false);
            }
            let s = (1.0 - prev.xi2) / (r.xi2 - prev.xi2);
            return (prev.t_us + s * (r.t_us - prev.t_us) - first.t_us, false);
        }
        prev = r;
    }
    (prev.t_us - first.t_us, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSeries {
    pub n_cycles: usize,
    pub records: Vec<SqueezingRecord>,
    pub squeezed_duration_us: f64,
    pub censored: bool,
}

/// Effect of a single cycle on the state at the start of the cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    pub period_us: f64,
    /// Loss of `|<J_y>|` over one cycle.
    pub cycle_change: f64,
    /// Loss of `|<J_y>|` over the same time under the bare interaction.
    pub free_change: f64,
    /// `1 - |<cycle|average>|^2` against the exact average Hamiltonian.
    pub infidelity: f64,
}

pub fn cycle_diagnostics(
    model: &SpinModel,
    v: &StateVector,
    cycle: &WahuhaCycle,
    params: &KrylovParams,
) -> Result<CycleDiagnostics> {
    let t = cycle.period_us;
    let after = run_schedule(&cycle.schedule()?, model, v, &[t], params)?.pop().expect("one checkpoint");
    let free = evolve(&model.hamiltonian(Interaction::Xy)?, v, t, params)?;
    let avg = evolve(&model.hamiltonian(Interaction::WahuhaAverage)?, v, t, params)?;
    let jy = |s: &StateVector| -> Result<f64> { Ok(collective_expectations(s)?.jy.abs()) };
    let j0 = jy(v)?;
    Ok(CycleDiagnostics {
        period_us: t,
        cycle_change: j0 - jy(&after)?,
        free_change: j0 - jy(&free)?,
        infidelity: (1.0 - after.fidelity(&avg)).max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetResult {
    pub t_start_us: f64,
    pub period_us: f64,
    pub series: Vec<FloquetSeries>,
    /// Cycles replaced by the average Hamiltonian, for the largest `n`.
    pub reference: Option<FloquetSeries>,
    pub diagnostics: CycleDiagnostics,
}

fn floquet_times(base: &[f64], t_start: f64, n: usize, period: f64) -> Vec<f64> {
    let shift = n as f64 * period;
    let mut t: Vec<f64> = base.iter().copied().filter(|&t| t < t_start).collect();
    t.extend((0..=n).map(|k| t_start + k as f64 * period));
    t.extend(base.iter().filter(|&&t| t > t_start).map(|&t| t + shift));
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    t
}

/// Twist to the optimum, apply `n` WAHUHA cycles for each `n`, continue.
/// Times count every interval, cycles included; exact ideal moments.
pub fn floquet_experiment(cfg: &RunConfig, cycles: &[usize]) -> Result<FloquetResult> {
    cfg.validate()?;
    let base = cfg.time.times()?;
    let model = spin_model(&cfg.lattice, cfg.j_mhz)?;
    let n_atoms = model.n_spins();
    let fc = &cfg.floquet;
    let t_start = match fc.t_start_us {
        Some(t) => t,
        None => extract_optimum(&exact_series(cfg, &ProtocolConfig::Standard, &base)?, cfg.analysis.fit_window)?.t_us,
    };
    let cycle = WahuhaCycle::new(fc.period_us, fc.pulse_model);
    let records = |schedule: &ProtocolSchedule, times: &[f64]| -> Result<Vec<SqueezingRecord>> {
        let m = summaries(&run_states(&model, schedule, times, cfg)?)?;
        Ok(times.iter().zip(&m).map(|(&t, m)| SqueezingRecord::from_moments(t, n_atoms, m)).collect())
    };
    let series: Vec<FloquetSeries> = cycles
        .par_iter()
        .map(|&n| {
            let times = floquet_times(&base, t_start, n, fc.period_us);
            let total = *times.last().expect("nonempty");
            let rec = records(&ProtocolSchedule::floquet(t_start, n, &cycle, total)?, &times)?;
            let (d, c) = squeezed_duration(&rec);
            Ok(FloquetSeries { n_cycles: n, records: rec, squeezed_duration_us: d, censored: c })
        })
        .collect::<Result<_>>()?;
    let reference = match cycles.iter().max() {
        Some(&n) if fc.reference && n > 0 => {
            let times = floquet_times(&base, t_start, n, fc.period_us);
            let total = *times.last().expect("nonempty");
            let rec = records(&ProtocolSchedule::floquet_reference(t_start, n, fc.period_us, total), &times)?;
            let (d, c) = squeezed_duration(&rec);
            Some(FloquetSeries { n_cycles: n, records: rec, squeezed_duration_us: d, censored: c })
        }
        _ => None,
    };
    let v_start =
        run_states(&model, &ProtocolSchedule::standard(t_start), &[t_start], cfg)?.pop().expect("one checkpoint");
    let diagnostics = cycle_diagnostics(&model, &v_start, &cycle, &cfg.krylov)?;
    Ok(FloquetResult { t_start_us: t_start, period_us: fc.period_us, series, reference, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistepResult {
    pub t_rotate_us: f64,
    pub angle_rad: f64,
    /// Whether the angle came from the semiclassical estimate.
    pub estimated_angle: bool,
    pub single: Vec<SqueezingRecord>,
    pub multi: Vec<SqueezingRecord>,
    pub single_optimum: Option<Optimum>,
    pub multi_optimum: Option<Optimum>,
    pub flags: Vec<String>,
}

/// Single-step and multi-step series side by side (exact ideal moments).
pub fn multistep_experiment(cfg: &RunConfig) -> Result<MultistepResult> {
    cfg.validate()?;
    let times = cfg.time.times()?;
    let model = spin_model(&cfg.lattice, cfg.j_mhz)?;
    let mc = &cfg.multistep;
    let angle = match mc.angle_rad {
        Some(a) => a,
        None => semiclassical_rotation(&model, mc.t_rotate_us)?,
    };
    let multi_cfg = ProtocolConfig::Multistep { t_rotate_us: mc.t_rotate_us, angle_rad: Some(angle) };
    let (single, multi) =
        rayon::join(|| exact_series(cfg, &ProtocolConfig::Standard, &times), || exact_series(cfg, &multi_cfg, &times));
    let (single, multi) = (single?, multi?);
    let pts = |r: &[SqueezingRecord]| r.iter().map(|r| (r.t_us, r.xi2)).collect::<Vec<_>>();
    let mut flags = Vec::new();
    let w = cfg.analysis.fit_window;
    let single_optimum = optimum_of("single", &pts(&single), w, &mut flags);
    let multi_optimum = optimum_of("multi", &pts(&multi), w, &mut flags);
    Ok(MultistepResult {
        t_rotate_us: mc.t_rotate_us,
        angle_rad: angle,
        estimated_angle: mc.angle_rad.is_none(),
        single,
        multi,
        single_optimum,
        multi_optimum,
        flags,
    })
}

/// A fitted exponent with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub rows: usize,
    pub cols: usize,
    pub n_atoms: usize,
    pub exact: Option<Optimum>,
    pub raw: Option<Optimum>,
    pub corrected: Option<Optimum>,
    pub flags: Vec<String>,
}

/// `xi2* ~ N^-nu`, `t* ~ N^mu` for one column of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub nu: Exponent,
    pub mu: Exponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub sizes: Vec<ScalingRow>,
    pub exact: Option<ScalingFit>,
    pub raw: Option<ScalingFit>,
    pub corrected: Option<ScalingFit>,
    pub reference_nu: Exponent,
    pub reference_mu: Exponent,
    /// Each column is fitted on its own optima.
    pub note: String,
}

/// Power-law fit to optima `(N, xi2*, t*)`; needs three sizes.
pub fn fit_scaling(optima: &[(usize, f64, f64)]) -> Result<ScalingFit> {
    if optima.len() < 3 {
        return Err(Error::InvalidParameter(format!("scaling fit needs 3 sizes, got {}", optima.len())));
    }
    let n: Vec<f64> = optima.iter().map(|o| o.0 as f64).collect();
    let xi: Vec<f64> = optima.iter().map(|o| o.1).collect();
    let t: Vec<f64> = optima.iter().map(|o| o.2).collect();
    let a = fit_power_law(&n, &xi)?;
    let b = fit_power_law(&n, &t)?;
    Ok(ScalingFit {
        nu: Exponent { value: -a.exponent, se: a.se_exponent },
        mu: Exponent { value: b.exponent, se: b.se_exponent },
    })
}

/// Full `simulate` pipeline for each configured array size.
pub fn scaling_sweep(cfg: &RunConfig) -> Result<ScalingResult> {
    cfg.validate()?;
    let sizes: Vec<ScalingRow> = cfg
        .scaling
        .sizes
        .par_iter()
        .map(|&[rows, cols]| {
            let mut c = cfg.clone();
            c.lattice = LatticeSpec { rows, cols, holes: Default::default(), ..cfg.lattice.clone() };
            c.seed = derive_seed(cfg.seed, &[5, rows as u64, cols as u64]);
            match simulate(&c) {
                Ok(s) => Ok(ScalingRow {
                    rows,
                    cols,
                    n_atoms: s.n_imaged,
                    exact: s.optima.exact,
                    raw: s.optima.shot_raw.or(s.optima.raw),
                    corrected: s.optima.shot_corrected.or(s.optima.corrected),
                    flags: s.optima.flags,
                }),
                Err(e) if e.is_numerical() => Ok(ScalingRow {
                    rows,
                    cols,
                    n_atoms: rows * cols,
                    exact: None,
                    raw: None,
                    corrected: None,
                    flags: vec![e.to_string()],
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let fit = |f: &dyn Fn(&ScalingRow) -> Option<Optimum>| {
        let pts: Vec<(usize, f64, f64)> =
            sizes.iter().filter_map(|r| f(r).map(|o| (r.n_atoms, o.xi2, o.t_us))).collect();
        fit_scaling(&pts).ok()
    };
    Ok(ScalingResult {
        exact: fit(&|r| r.exact),
        raw: fit(&|r| r.raw),
        corrected: fit(&|r| r.corrected),
        sizes,
        reference_nu: REFERENCE_NU,
        reference_mu: REFERENCE_MU,
        note: "raw and corrected optima are extracted and fitted independently".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OatRow {
    pub n_atoms: usize,
    pub chi_mhz: f64,
    pub xi2: f64,
    pub xi2_db: f64,
    pub t_us: f64,
    pub quantum_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OatScaling {
    pub rows: Vec<OatRow>,
    pub fit: ScalingFit,
}

/// One-axis-twisting optima with `chi = chi_n / N`.
pub fn oat_scaling(sizes: &[usize], chi_n_mhz: f64) -> Result<OatScaling> {
    let rows: Vec<OatRow> = sizes
        .par_iter()
        .map(|&n| {
            let chi = chi_n_mhz / n as f64;
            let (xi2, t) = oat_optimum(n, chi)?;
            Ok(OatRow { n_atoms: n, chi_mhz: chi, xi2, xi2_db: to_db(xi2), t_us: t, quantum_bound: quantum_bound(n) })
        })
        .collect::<Result<_>>()?;
    let fit = fit_scaling(&rows.iter().map(|r| (r.n_atoms, r.xi2, r.t_us)).collect::<Vec<_>>())?;
    Ok(OatScaling { rows, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmPoint {
    pub t_us: f64,
    /// `2 |<J_y>| / N`
    pub mean_fraction: f64,
    /// `4 Var / N`
    pub var_norm: f64,
    /// Largest configured `k` whose bound the point violates.
    pub depth_exceeds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmResult {
    pub curves: Vec<SmCurve>,
    pub trajectory: Vec<SmPoint>,
}

/// Bound curves for each `k`, plus the ideal trajectory of the array placed against them.
pub fn sm_bounds(cfg: &RunConfig) -> Result<SmResult> {
    cfg.validate()?;
    let curves: Vec<SmCurve> =
        cfg.sm.ks.par_iter().map(|&k| sm_depth_bound(k, cfg.sm.points)).collect::<Result<_>>()?;
    let recs = exact_series(cfg, &cfg.protocol, &cfg.time.times()?)?;
    let trajectory = recs
        .iter()
        .filter(|r| !r.collapsed)
        .map(|r| {
            let (x, v) = r.normalized();
            let depth_exceeds = curves.iter().filter(|c| c.is_below(x, v)).map(|c| c.k).max();
            SmPoint { t_us: r.t_us, mean_fraction: x, var_norm: v, depth_exceeds }
        })
        .collect();
    Ok(SmResult { curves, trajectory })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScRow {
    pub t_us: f64,
    pub theta_star: f64,
    pub min_var: f64,
    pub xi2_proxy: f64,
    pub xi2_proxy_db: f64,
}

impl ScRow {
    fn new(t_us: f64, s: ClassicalSqueezing) -> Self {
        Self {
            t_us,
            theta_star: s.theta_star,
            min_var: s.min_var,
            xi2_proxy: s.xi2_proxy,
            xi2_proxy_db: to_db(s.xi2_proxy),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemiclassicalResult {
    pub n_atoms: usize,
    pub chi_mhz: f64,
    pub j_tilde: f64,
    pub single: Vec<ScRow>,
    pub multi: Vec<ScRow>,
    pub t_rotate_us: f64,
    pub angle_rad: f64,
    pub single_optimum: Option<Optimum>,
    pub multi_optimum: Option<Optimum>,
    pub snapshots: Vec<(f64, ClassicalEnsemble)>,
    pub flags: Vec<String>,
}

/// Classical twisting of a Gaussian cloud, continuous and with one
/// intermediate rotation.
pub fn semiclassical_run(cfg: &RunConfig) -> Result<SemiclassicalResult> {
    cfg.validate()?;
    let sc = &cfg.semiclassical;
    let n = sc.n_atoms;
    let chi = sc.chi_mhz.unwrap_or(cfg.oat.chi_n_mhz / n as f64);
    let j_tilde = sc.j_tilde.unwrap_or_else(|| matched_j_tilde(n, chi));
    let e0 = ClassicalEnsemble::new(n, sc.n_points, sc.m_xy, j_tilde, derive_seed(cfg.seed, &[6]))?;
    let times = sc.time.times()?;
    let single: Vec<ScRow> =
        times.iter().map(|&t| Ok(ScRow::new(t, sc_squeezing(&sc_evolve(&e0, t))?))).collect::<Result<_>>()?;
    let w = cfg.analysis.fit_window;
    let mut flags = Vec::new();
    let pts = |rows: &[ScRow]| rows.iter().map(|r| (r.t_us, r.xi2_proxy)).collect::<Vec<_>>();
    let single_optimum = optimum_of("single", &pts(&single), w, &mut flags);
    let t1 = match (sc.t_rotate_us, single_optimum) {
        (Some(t), _) => t,
        (None, Some(o)) => 0.4 * o.t_us,
        (None, None) => return Err(Error::NoInteriorMinimum),
    };
    let stage = sc_evolve(&e0, t1);
    let angle = -sc.alignment_fraction * sc_squeezing(&stage)?.theta_star;
    let rotated = sc_rotate(&stage, angle);
    let multi: Vec<ScRow> = times
        .iter()
        .map(|&t| {
            let s =
                if t < t1 { sc_squeezing(&sc_evolve(&e0, t))? } else { sc_squeezing(&sc_evolve(&rotated, t - t1))? };
            Ok(ScRow::new(t, s))
        })
        .collect::<Result<_>>()?;
    let multi_optimum = optimum_of("multi", &pts(&multi), w, &mut flags);
    let snapshots = sc.snapshots_us.iter().map(|&t| (t, sc_evolve(&e0, t))).collect();
    Ok(SemiclassicalResult {
        n_atoms: n,
        chi_mhz: chi,
        j_tilde,
        single,
        multi,
        t_rotate_us: t1,
        angle_rad: angle,
        single_optimum,
        multi_optimum,
        snapshots,
        flags,
    })
}

/// Detection correction of imported spin-length and variance shots.
pub fn correct_shots(
    spin_length: &ShotSet,
    variance: &ShotSet,
    em: &ErrorModel,
    cfg: &RunConfig,
) -> Result<crate::error_models::CorrectedSqueezing> {
    if spin_length.n_atoms() != variance.n_atoms() {
        return Err(Error::DimensionMismatch { expected: spin_length.n_atoms(), got: variance.n_atoms() });
    }
    let sl = shot_statistics(spin_length, cfg.analysis.bootstrap)?;
    let vs = shot_statistics(variance, cfg.analysis.bootstrap)?;
    correct_squeezing(&sl, &vs, spin_length.n_atoms(), em, cfg.analysis.inverse_mode)
}
