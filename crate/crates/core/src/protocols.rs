//! Pulse sequences: preparation, free evolution, analysis rotations, the
//! multi-step variant and the WAHUHA Floquet cycle.
//!
//! A pulse with phase `phi` and angle `a` rotates every spin by
//! `exp(-i (a/2) (cos(phi) sx + sin(phi) sy))`. With the bit convention of
//! [`crate::state`], a pi/2 pulse at `phi = pi` takes `|up...up>` to the
//! coherent state along `+y`, and a second one takes `+y` to `|down...down>`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{evolve_operator, KrylovParams, Propagator};
use crate::lattice::CouplingMatrix;
use crate::operators::{CompiledHamiltonian, Hamiltonian, Sum, TransverseField};
use crate::state::StateVector;

/// Phase of the pulse used for preparation and spin-length readout.
pub const PREPARATION_PHASE: f64 = PI;
/// Gaussian envelopes are cut at this many standard deviations on each side.
const GAUSSIAN_CUTOFF: f64 = 4.0;
/// Number of piecewise-constant slices used for a Gaussian envelope.
const GAUSSIAN_SLICES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Envelope {
    /// Constant Rabi frequency; duration follows from the angle.
    Square { rabi_mhz: f64 },
    /// Gaussian with standard deviation `half_width_ns` (half-width at
    /// `1/sqrt(e)`); the peak Rabi frequency follows from the angle.
    Gaussian { half_width_ns: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum PulseModel {
    #[default]
    Instantaneous,
    Finite {
        envelope: Envelope,
        #[serde(default)]
        interactions: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Azimuth of the rotation axis in the x-y plane (radians).
    pub phase: f64,
    /// Rotation angle (radians).
    pub angle: f64,
    #[serde(default)]
    pub model: PulseModel,
}

impl Pulse {
    pub fn new(phase: f64, angle: f64) -> Self {
        Self { phase, angle, model: PulseModel::Instantaneous }
    }

    pub fn about_x(angle: f64) -> Self {
        Self::new(0.0, angle)
    }

    pub fn about_y(angle: f64) -> Self {
        Self::new(FRAC_PI_2, angle)
    }

    /// The pi/2 pulse that maps `|up...up>` onto the `+y` coherent state.
    pub fn preparation() -> Self {
        Self::new(PREPARATION_PHASE, FRAC_PI_2)
    }

    pub fn with_model(mut self, model: PulseModel) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.angle.is_finite() || !self.phase.is_finite() {
            return Err(Error::InvalidParameter("pulse angle and phase must be finite".into()));
        }
        match self.model {
            PulseModel::Finite { envelope: Envelope::Square { rabi_mhz }, .. } if !(rabi_mhz > 0.0) => {
                Err(Error::InvalidParameter(format!("Rabi frequency must be positive, got {rabi_mhz}")))
            }
            PulseModel::Finite { envelope: Envelope::Gaussian { half_width_ns }, .. } if !(half_width_ns > 0.0) => {
                Err(Error::InvalidParameter(format!("Gaussian half-width must be positive, got {half_width_ns}")))
            }
            _ => Ok(()),
        }
    }

    pub fn duration_us(&self) -> f64 {
        match self.model {
            PulseModel::Instantaneous => 0.0,
            PulseModel::Finite { envelope: Envelope::Square { rabi_mhz }, .. } => self.angle.abs() / (TAU * rabi_mhz),
            PulseModel::Finite { envelope: Envelope::Gaussian { half_width_ns }, .. } => {
                2.0 * GAUSSIAN_CUTOFF * half_width_ns * 1e-3
            }
        }
    }

    /// Piecewise-constant Rabi frequencies (MHz) and slice length (us) whose
    /// total area is exactly `|angle| / (2 pi)`.
    fn slices(&self) -> (Vec<f64>, f64) {
        let area = self.angle.abs() / TAU;
        match self.model {
            PulseModel::Instantaneous => (Vec::new(), 0.0),
            PulseModel::Finite { envelope: Envelope::Square { .. }, .. } => {
                let d = self.duration_us();
                (vec![area / d], d)
            }
            PulseModel::Finite { envelope: Envelope::Gaussian { half_width_ns }, .. } => {
                let sigma = half_width_ns * 1e-3;
                let dt = self.duration_us() / GAUSSIAN_SLICES as f64;
                let shape: Vec<f64> = (0..GAUSSIAN_SLICES)
                    .map(|k| {
                        let t = (k as f64 + 0.5) * dt - GAUSSIAN_CUTOFF * sigma;
                        (-t * t / (2.0 * sigma * sigma)).exp()
                    })
                    .collect();
                let total: f64 = shape.iter().sum::<f64>() * dt;
                (shape.into_iter().map(|s| s * area / total).collect(), dt)
            }
        }
    }
}

/// Product state with every spin along `+y`: `(|up> + i|down>)/sqrt(2)` per site.
pub fn prepare_coherent_y(n: usize) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::product(&vec![[C64::new(s, 0.0), C64::new(0.0, s)]; n])
}

/// Global rotation `exp(-i (angle/2) sum_i sigma_i^phi)` applied spin by spin.
pub fn rotate(v: &StateVector, phase: f64, angle: f64) -> StateVector {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let cc = C64::new(c, 0.0);
    // U|up> = c|up> - i s e^{i phi}|down>,  U|down> = c|down> - i s e^{-i phi}|up>
    let to_down = C64::new(0.0, -s) * C64::from_polar(1.0, phase);
    let to_up = C64::new(0.0, -s) * C64::from_polar(1.0, -phase);
    let mut amps = v.amplitudes().to_vec();
    for i in 0..v.n_spins() {
        let bit = 1usize << i;
        for s0 in (0..amps.len()).filter(|s| s & bit == 0) {
            let s1 = s0 | bit;
            let (down, up) = (amps[s0], amps[s1]);
            amps[s0] = cc * down + to_down * up;
            amps[s1] = cc * up + to_up * down;
        }
    }
    StateVector::from_amplitudes(v.n_spins(), amps).expect("same dimension")
}

/// Apply a pulse; finite pulses with interactions need the interaction Hamiltonian.
pub fn apply_pulse(
    p: &Pulse,
    v: &StateVector,
    interactions: Option<&Hamiltonian>,
    params: &KrylovParams,
) -> Result<StateVector> {
    p.validate()?;
    match p.model {
        PulseModel::Instantaneous => Ok(rotate(v, p.phase, p.angle)),
        PulseModel::Finite { interactions: with_int, .. } => {
            let n = v.n_spins();
            // negative angles rotate about the opposite axis
            let phase = if p.angle < 0.0 { p.phase + PI } else { p.phase };
            let (rabi, dt) = p.slices();
            let compiled = match (with_int, interactions) {
                (true, Some(h)) => Some(h.compile()),
                (true, None) => {
                    return Err(Error::InvalidParameter("finite pulse with interactions needs a Hamiltonian".into()))
                }
                (false, _) => None,
            };
            let mut state = v.clone();
            for omega in rabi {
                let drive = TransverseField::new(n, phase, omega / 2.0);
                state = match &compiled {
                    Some(h) => evolve_operator(&Sum(h, &drive), &state, dt, params)?,
                    None => evolve_operator(&drive, &state, dt, params)?,
                };
            }
            Ok(state)
        }
    }
}

/// Which interaction acts during a free-evolution segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    #[default]
    Xy,
    Heisenberg,
    Zz,
    Oat,
    /// The Heisenberg model a WAHUHA cycle averages the XY model to.
    WahuhaAverage,
}

/// Couplings and interaction strength shared by every step of a schedule.
#[derive(Debug, Clone)]
pub struct SpinModel {
    pub couplings: CouplingMatrix,
    pub j_mhz: f64,
}

impl SpinModel {
    pub fn new(couplings: CouplingMatrix, j_mhz: f64) -> Self {
        Self { couplings, j_mhz }
    }

    pub fn n_spins(&self) -> usize {
        self.couplings.n_sites()
    }

    pub fn hamiltonian(&self, kind: Interaction) -> Result<Hamiltonian> {
        Ok(match kind {
            Interaction::Xy => Hamiltonian::Xy { j_mhz: self.j_mhz, couplings: self.couplings.clone() },
            Interaction::Heisenberg => Hamiltonian::Heisenberg { j_mhz: self.j_mhz, couplings: self.couplings.clone() },
            Interaction::Zz => Hamiltonian::Zz { couplings: self.couplings.clone() },
            Interaction::Oat => Hamiltonian::Oat { n: self.n_spins(), chi_mhz: self.couplings.rotor_chi(self.j_mhz)? },
            Interaction::WahuhaAverage => wahuha_average_hamiltonian(self),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "lowercase")]
pub enum Step {
    Pulse(Pulse),
    Free {
        #[serde(default)]
        interaction: Interaction,
        duration_us: f64,
    },
}

impl Step {
    pub fn free(duration_us: f64) -> Self {
        Step::Free { interaction: Interaction::Xy, duration_us }
    }

    pub fn duration_us(&self) -> f64 {
        match self {
            Step::Pulse(p) => p.duration_us(),
            Step::Free { duration_us, .. } => *duration_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProtocolSchedule {
    pub steps: Vec<Step>,
}

impl ProtocolSchedule {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    /// Quench under the native XY interaction.
    pub fn standard(total_us: f64) -> Self {
        Self::new(vec![Step::free(total_us)])
    }

    /// Twist for `t_rotate_us`, rotate by `angle` about `y`, twist until `total_us`.
    pub fn multistep(t_rotate_us: f64, angle: f64, total_us: f64) -> Self {
        Self::new(vec![
            Step::free(t_rotate_us),
            Step::Pulse(Pulse::about_y(angle)),
            Step::free((total_us - t_rotate_us).max(0.0)),
        ])
    }

    /// Twist until `t_start_us`, run `n_cycles` WAHUHA cycles, then twist until `total_us`.
    pub fn floquet(t_start_us: f64, n_cycles: usize, cycle: &WahuhaCycle, total_us: f64) -> Result<Self> {
        let mut steps = vec![Step::free(t_start_us)];
        let one = cycle.steps()?;
        for _ in 0..n_cycles {
            steps.extend(one.iter().cloned());
        }
        let used = t_start_us + n_cycles as f64 * cycle.period_us;
        steps.push(Step::free((total_us - used).max(0.0)));
        Ok(Self::new(steps))
    }

    /// As [`Self::floquet`] with the cycles replaced by their exact average Hamiltonian.
    pub fn floquet_reference(t_start_us: f64, n_cycles: usize, period_us: f64, total_us: f64) -> Self {
        let frozen = n_cycles as f64 * period_us;
        Self::new(vec![
            Step::free(t_start_us),
            Step::Free { interaction: Interaction::WahuhaAverage, duration_us: frozen },
            Step::free((total_us - t_start_us - frozen).max(0.0)),
        ])
    }

    pub fn total_duration_us(&self) -> f64 {
        self.steps.iter().map(Step::duration_us).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.steps {
            match s {
                Step::Pulse(p) => p.validate()?,
                Step::Free { duration_us, .. } if !(*duration_us >= 0.0) => {
                    return Err(Error::InvalidParameter(format!("negative free evolution {duration_us}")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Execute a schedule, returning the state at each checkpoint.
///
/// A checkpoint at time `t` sees every zero-duration pulse scheduled at `t`.
/// Checkpoints may not fall strictly inside a finite pulse.
pub fn run_schedule(
    schedule: &ProtocolSchedule,
    model: &SpinModel,
    v0: &StateVector,
    checkpoints: &[f64],
    params: &KrylovParams,
) -> Result<Vec<StateVector>> {
    schedule.validate()?;
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("checkpoints must be sorted".into()));
    }
    let end = schedule.total_duration_us();
    let eps = 1e-12 * end.max(1.0);
    if let Some(&last) = checkpoints.last() {
        if last > end + eps {
            return Err(Error::CheckpointBeyondEnd { checkpoint: last, end });
        }
    }

    let mut compiled: Vec<(Interaction, CompiledHamiltonian)> = Vec::new();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut pending = checkpoints.iter().copied().peekable();
    let (mut t, mut state) = (0.0, v0.clone());

    for step in &schedule.steps {
        match step {
            Step::Pulse(p) => {
                let d = p.duration_us();
                if pending.peek().is_some_and(|&c| c > t + eps && c < t + d - eps) {
                    return Err(Error::InvalidParameter(format!("checkpoint inside pulse starting at {t} us")));
                }
                if d > 0.0 {
                    while pending.peek().is_some_and(|&c| c <= t + eps) {
                        out.push(state.clone());
                        pending.next();
                    }
                }
                let with_int = matches!(p.model, PulseModel::Finite { interactions: true, .. });
                let h = if with_int { Some(model.hamiltonian(Interaction::Xy)?) } else { None };
                state = apply_pulse(p, &state, h.as_ref(), params)?;
                t += d;
            }
            Step::Free { interaction, duration_us } => {
                let idx = match compiled.iter().position(|(k, _)| k == interaction) {
                    Some(i) => i,
                    None => {
                        compiled.push((*interaction, model.hamiltonian(*interaction)?.compile()));
                        compiled.len() - 1
                    }
                };
                let prop = Propagator::new(&compiled[idx].1, *params)?;
                let t_end = t + duration_us;
                // a checkpoint at the very end waits for the steps that follow
                while let Some(&c) = pending.peek() {
                    if c >= t_end - eps {
                        break;
                    }
                    let dt = (c - t).max(0.0);
                    if dt > 0.0 {
                        state = prop.evolve(&state, dt)?;
                        t = c;
                    }
                    out.push(state.clone());
                    pending.next();
                }
                if t_end > t {
                    state = prop.evolve(&state, t_end - t)?;
                }
                t = t_end;
            }
        }
    }
    // anything left sits at the very end
    for _ in pending {
        out.push(state.clone());
    }
    Ok(out)
}

/// Relative lengths of the five free intervals around the four WAHUHA pulses.
pub const WAHUHA_SPACING: [f64; 5] = [1.0, 1.0, 2.0, 1.0, 1.0];

/// One WAHUHA cycle: pi/2 pulses about `+x, +y, -y, -x`.
///
/// With the default `tau, tau, 2 tau, tau, tau` spacing every toggling frame
/// `(xx+yy, xx+zz, yy+zz, xx+zz)` is weighted so that `xx`, `yy` and `zz`
/// each carry two thirds of the cycle, and the palindromic placement removes
/// the second-order average-Hamiltonian term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WahuhaCycle {
    pub period_us: f64,
    #[serde(default)]
    pub pulse_model: PulseModel,
    #[serde(default = "default_spacing")]
    pub spacing: [f64; 5],
}

fn default_spacing() -> [f64; 5] {
    WAHUHA_SPACING
}

impl WahuhaCycle {
    pub fn new(period_us: f64, pulse_model: PulseModel) -> Self {
        Self { period_us, pulse_model, spacing: WAHUHA_SPACING }
    }

    pub fn pulses(&self) -> [Pulse; 4] {
        [0.0, FRAC_PI_2, 3.0 * FRAC_PI_2, PI].map(|phase| Pulse::new(phase, FRAC_PI_2).with_model(self.pulse_model))
    }

    /// The cycle as schedule steps; finite pulses are centered on the ideal
    /// instants and eat into the neighboring free intervals.
    pub fn steps(&self) -> Result<Vec<Step>> {
        if !(self.period_us > 0.0) {
            return Err(Error::InvalidParameter(format!("Floquet period must be positive, got {}", self.period_us)));
        }
        if self.spacing.iter().any(|s| !(*s >= 0.0)) || self.spacing.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("WAHUHA spacing must be nonnegative".into()));
        }
        let unit = self.period_us / self.spacing.iter().sum::<f64>();
        let pulses = self.pulses();
        let half = pulses[0].duration_us() / 2.0;
        let mut steps = Vec::with_capacity(9);
        for (k, frac) in self.spacing.iter().enumerate() {
            let trim = if k == 0 || k == 4 { half } else { 2.0 * half };
            let d = frac * unit - trim;
            if d < -1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "pulses of {:.4} us do not fit into a {:.4} us Floquet cycle",
                    2.0 * half,
                    self.period_us
                )));
            }
            steps.push(Step::free(d.max(0.0)));
            if k < 4 {
                steps.push(Step::Pulse(pulses[k]));
            }
        }
        Ok(steps)
    }

    pub fn schedule(&self) -> Result<ProtocolSchedule> {
        Ok(ProtocolSchedule::new(self.steps()?))
    }
}

/// `H_avg` of a WAHUHA cycle driven by the XY model of `model`.
///
/// Each of `xx`, `yy`, `zz` is weighted by 2/3, giving
/// `-(J/3) sum w s_i . s_j`, i.e. the Heisenberg kind at `J/2`.
pub fn wahuha_average_hamiltonian(model: &SpinModel) -> Hamiltonian {
    Hamiltonian::Heisenberg { j_mhz: model.j_mhz / 2.0, couplings: model.couplings.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::evolve;
    use crate::lattice::LatticeSpec;
    use crate::operators::collective_expectations;

    fn model(rows: usize, cols: usize) -> SpinModel {
        SpinModel::new(LatticeSpec::square(rows, cols, 15.0).coupling_matrix().unwrap(), 0.25)
    }

    fn assert_same(a: &StateVector, b: &StateVector, tol: f64) {
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn single_spin_coherent_state() {
        let v = prepare_coherent_y(1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // (down, up) ordering by index
        assert_same(&v, &StateVector::from_amplitudes(1, vec![C64::new(0.0, s), C64::new(s, 0.0)]).unwrap(), 1e-15);
    }

    #[test]
    fn coherent_state_statistics() {
        let m = collective_expectations(&prepare_coherent_y(4)).unwrap();
        assert!((m.jy - 2.0).abs() < 1e-12);
        assert!((m.var_z() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preparation_pulse_gives_plus_y() {
        let v = rotate(&StateVector::all_up(3), PREPARATION_PHASE, FRAC_PI_2);
        assert!(v.fidelity(&prepare_coherent_y(3)) > 1.0 - 1e-14);
        // about +x the same pulse lands on -y
        let w = rotate(&StateVector::all_up(3), 0.0, FRAC_PI_2);
        let m = collective_expectations(&w).unwrap();
        assert!((m.jy + 1.5).abs() < 1e-12);
        // readout pulse sends +y to all-down
        let r = rotate(&prepare_coherent_y(3), PREPARATION_PHASE, FRAC_PI_2);
        assert!(r.fidelity(&StateVector::all_down(3)) > 1.0 - 1e-14);
    }

    #[test]
    fn two_half_pi_pulses_make_a_pi_pulse() {
        let v = prepare_coherent_y(3);
        let a = rotate(&rotate(&v, 0.3, FRAC_PI_2), 0.3, FRAC_PI_2);
        assert_same(&a, &rotate(&v, 0.3, PI), 1e-14);
    }

    #[test]
    fn finite_pulse_without_interactions_is_exact_rotation() {
        let v = StateVector::all_up(3);
        let params = KrylovParams::default();
        for env in [Envelope::Square { rabi_mhz: 22.2 }, Envelope::Gaussian { half_width_ns: 6.5 }] {
            let p = Pulse::preparation().with_model(PulseModel::Finite { envelope: env, interactions: false });
            let out = apply_pulse(&p, &v, None, &params).unwrap();
            assert!(out.fidelity(&prepare_coherent_y(3)) > 1.0 - 1e-10);
        }
        let p = Pulse::new(0.4, -1.0)
            .with_model(PulseModel::Finite { envelope: Envelope::Square { rabi_mhz: 5.0 }, interactions: false });
        let out = apply_pulse(&p, &prepare_coherent_y(2), None, &params).unwrap();
        assert!(out.fidelity(&rotate(&prepare_coherent_y(2), 0.4, -1.0)) > 1.0 - 1e-10);
    }

    #[test]
    fn square_duration_from_area() {
        let p = Pulse::preparation()
            .with_model(PulseModel::Finite { envelope: Envelope::Square { rabi_mhz: 22.2 }, interactions: true });
        assert!((p.duration_us() - 0.25 / 22.2).abs() < 1e-15);
    }

    #[test]
    fn interacting_preparation_loses_polarization() {
        let m = model(3, 3);
        let h = m.hamiltonian(Interaction::Xy).unwrap();
        let p = Pulse::preparation()
            .with_model(PulseModel::Finite { envelope: Envelope::Square { rabi_mhz: 22.2 }, interactions: true });
        let out = apply_pulse(&p, &StateVector::all_up(9), Some(&h), &KrylovParams::default()).unwrap();
        let frac = collective_expectations(&out).unwrap().jy / 4.5;
        assert!(frac < 1.0 - 1e-6 && frac > 0.9, "{frac}");
        assert!(apply_pulse(&p, &StateVector::all_up(9), None, &KrylovParams::default()).is_err());
    }

    #[test]
    fn schedules_and_checkpoints() {
        let m = model(2, 2);
        let v0 = prepare_coherent_y(4);
        let params = KrylovParams::default();
        let empty = run_schedule(&ProtocolSchedule::default(), &m, &v0, &[0.0], &params).unwrap();
        assert_eq!(empty, vec![v0.clone()]);

        let h = m.hamiltonian(Interaction::Xy).unwrap();
        let s = ProtocolSchedule::standard(0.6);
        let got = run_schedule(&s, &m, &v0, &[0.1, 0.35, 0.6], &params).unwrap();
        for (st, t) in got.iter().zip([0.1, 0.35, 0.6]) {
            assert!(st.fidelity(&evolve(&h, &v0, t, &params).unwrap()) > 1.0 - 1e-12);
        }
        assert!(matches!(run_schedule(&s, &m, &v0, &[0.7], &params), Err(Error::CheckpointBeyondEnd { .. })));
    }

    #[test]
    fn pulse_at_checkpoint_is_applied_first() {
        let m = model(2, 2);
        let v0 = prepare_coherent_y(4);
        let params = KrylovParams::default();
        let s = ProtocolSchedule::multistep(0.2, 0.5, 0.4);
        let got = run_schedule(&s, &m, &v0, &[0.2], &params).unwrap();
        let h = m.hamiltonian(Interaction::Xy).unwrap();
        let expected = rotate(&evolve(&h, &v0, 0.2, &params).unwrap(), FRAC_PI_2, 0.5);
        assert!(got[0].fidelity(&expected) > 1.0 - 1e-12);
    }

    #[test]
    fn wahuha_is_identity_without_interactions() {
        let v = prepare_coherent_y(3);
        let mut w = v.clone();
        for p in WahuhaCycle::new(0.36, PulseModel::Instantaneous).pulses() {
            w = rotate(&w, p.phase, p.angle);
        }
        assert!(w.fidelity(&v) > 1.0 - 1e-14);
    }

    #[test]
    fn wahuha_bookkeeping() {
        let c = WahuhaCycle::new(0.36, PulseModel::Instantaneous);
        let sched = c.schedule().unwrap();
        assert_eq!(sched.steps.len(), 9);
        assert!((sched.total_duration_us() - 0.36).abs() < 1e-15);

        let g = WahuhaCycle::new(
            0.36,
            PulseModel::Finite { envelope: Envelope::Gaussian { half_width_ns: 6.5 }, interactions: true },
        );
        assert!((g.schedule().unwrap().total_duration_us() - 0.36).abs() < 1e-12);
        let too_short = WahuhaCycle::new(0.1, g.pulse_model);
        assert!(too_short.steps().is_err());
    }

    #[test]
    fn wahuha_converges_to_average_hamiltonian() {
        let m = model(2, 3);
        let params = KrylovParams::default();
        let h = m.hamiltonian(Interaction::Xy).unwrap();
        let start = rotate(&evolve(&h, &prepare_coherent_y(6), 0.3, &params).unwrap(), FRAC_PI_2, 0.4);
        let avg = wahuha_average_hamiltonian(&m);
        let gaps: Vec<f64> = [0.36, 0.18, 0.09]
            .iter()
            .map(|&tf| {
                let s = WahuhaCycle::new(tf, PulseModel::Instantaneous).schedule().unwrap();
                let got = run_schedule(&s, &m, &start, &[tf], &params).unwrap().pop().unwrap();
                1.0 - got.fidelity(&evolve(&avg, &start, tf, &params).unwrap())
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn heisenberg_commutes_with_rotations() {
        let m = model(2, 2);
        let params = KrylovParams::default();
        let h = m.hamiltonian(Interaction::Heisenberg).unwrap();
        let v = evolve(&m.hamiltonian(Interaction::Xy).unwrap(), &prepare_coherent_y(4), 0.4, &params).unwrap();
        let a = rotate(&evolve(&h, &v, 0.7, &params).unwrap(), 1.1, 0.8);
        let b = evolve(&h, &rotate(&v, 1.1, 0.8), 0.7, &params).unwrap();
        assert_same(&a, &b, 1e-10);
    }

    #[test]
    fn schedule_serializes() {
        let s = ProtocolSchedule::floquet(0.2, 2, &WahuhaCycle::new(0.36, PulseModel::Instantaneous), 1.5).unwrap();
        let text = toml::to_string(&s).unwrap();
        let back: ProtocolSchedule = toml::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
