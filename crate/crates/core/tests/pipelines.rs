use std::f64::consts::TAU;

use xy_squeeze::analysis::config::TimeGrid;
use xy_squeeze::analysis::{cycle_diagnostics, run_states, spin_model, theta_scan, RunConfig};
use xy_squeeze::krylov::{evolve_checkpoints, KrylovParams};
use xy_squeeze::lattice::{CouplingMatrix, LatticeSpec};
use xy_squeeze::measurement::squeezing_record;
use xy_squeeze::operators::Hamiltonian;
use xy_squeeze::protocols::{prepare_coherent_y, ProtocolSchedule, PulseModel, WahuhaCycle};
use xy_squeeze::rotor::oat_record;

/// Closed-form twisting of a coherent state under `chi J_z^2`.
fn kitagawa_ueda(n: usize, chi_mhz: f64, t_us: f64) -> (f64, f64) {
    let nf = n as f64;
    let mu = 2.0 * TAU * chi_mhz * t_us;
    let a = 1.0 - mu.cos().powi(n as i32 - 2);
    let b = 4.0 * (mu / 2.0).sin() * (mu / 2.0).cos().powi(n as i32 - 2);
    let v_min = nf / 4.0 * (1.0 + (nf - 1.0) / 4.0 * (a - a.hypot(b)));
    let mean = nf / 2.0 * (mu / 2.0).cos().powi(n as i32 - 1);
    (v_min, nf * v_min / (mean * mean))
}

#[test]
fn rotor_matches_closed_form_twisting() {
    for n in [4, 10, 50, 200] {
        for k in 1..20 {
            let t = 0.02 * k as f64;
            let r = oat_record(n, 0.5 / n as f64, t);
            let (v, xi2) = kitagawa_ueda(n, 0.5 / n as f64, t);
            assert!((r.min_var - v).abs() < 1e-9 * n as f64, "N={n} t={t}: {} vs {v}", r.min_var);
            assert!((r.xi2 - xi2).abs() < 1e-9 * xi2.max(1.0), "N={n} t={t}: {} vs {xi2}", r.xi2);
        }
    }
}

#[test]
fn uniform_xy_reduces_to_twisting() {
    // all-to-all XY stays in the symmetric sector, where it is chi J_z^2 with chi = J w
    let (n, j, w) = (8, 0.25, 0.7);
    let h = Hamiltonian::Xy { j_mhz: j, couplings: CouplingMatrix::uniform(n, w) };
    let times: Vec<f64> = (0..=12).map(|k| 0.1 * k as f64).collect();
    let states = evolve_checkpoints(&h, &prepare_coherent_y(n), &times, &KrylovParams::default()).unwrap();
    for (t, v) in times.iter().zip(&states) {
        let exact = squeezing_record(v, *t).unwrap();
        let rotor = oat_record(n, j * w, *t);
        assert!((exact.xi2 - rotor.xi2).abs() < 1e-8 * rotor.xi2.max(1.0), "t={t}: {} vs {}", exact.xi2, rotor.xi2);
        assert!((exact.mean_spin - rotor.mean_spin).abs() < 1e-8);
        let (_, ku) = kitagawa_ueda(n, j * w, *t);
        assert!((exact.xi2 - ku).abs() < 1e-8 * ku.max(1.0));
    }
}

#[test]
fn theta_scan_recovers_exact_angle() {
    let mut cfg = RunConfig::default().ideal();
    cfg.lattice = LatticeSpec::square(3, 3, 15.0);
    cfg.shots = 4000;
    cfg.seed = 11;
    cfg.analysis.theta_points = 24;
    let scan = theta_scan(&cfg, Some(0.3)).unwrap();
    let d = (scan.fit.theta_min - scan.exact_theta_star).abs();
    assert!(d <= 4.0 * scan.fit.se_theta + 1e-3, "{d} vs se {}", scan.fit.se_theta);
    for r in &scan.rows {
        assert!((r.var - r.exact_var).abs() <= 5.0 * r.se + 1e-9, "theta {}: {} vs {}", r.theta, r.var, r.exact_var);
    }
}

#[test]
fn wahuha_cycles_hold_the_squeezed_state() {
    let mut cfg = RunConfig::default().ideal();
    cfg.lattice = LatticeSpec::square(3, 3, 15.0);
    cfg.time = TimeGrid::uniform(0.0, 0.3, 0.05);
    let model = spin_model(&cfg.lattice, 0.25).unwrap();
    let v = run_states(&model, &ProtocolSchedule::standard(0.26), &[0.26], &cfg).unwrap().pop().unwrap();
    let d = cycle_diagnostics(&model, &v, &WahuhaCycle::new(0.36, PulseModel::Instantaneous), &KrylovParams::default())
        .unwrap();
    assert!(d.cycle_change < 0.1 * d.free_change, "{d:?}");
    let finer =
        cycle_diagnostics(&model, &v, &WahuhaCycle::new(0.09, PulseModel::Instantaneous), &KrylovParams::default())
            .unwrap();
    assert!(finer.infidelity < d.infidelity);
}
