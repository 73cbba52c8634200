//! Readout flips bias squeezing upward; inverting the detection map on the
//! shot moments recovers the ideal value within sampling error.

use xy_squeeze::error_models::{correct_squeezing, detection_forward_shots, ErrorModel, InverseMode};
use xy_squeeze::krylov::{evolve, KrylovParams};
use xy_squeeze::lattice::LatticeSpec;
use xy_squeeze::measurement::{sample_shots, shot_squeezing, shot_statistics, squeezing_record, Readout};
use xy_squeeze::operators::Hamiltonian;
use xy_squeeze::protocols::prepare_coherent_y;

fn main() -> xy_squeeze::Result<()> {
    let n = 9;
    let h = Hamiltonian::Xy { j_mhz: 0.25, couplings: LatticeSpec::square(3, 3, 15.0).coupling_matrix()? };
    let v = evolve(&h, &prepare_coherent_y(n), 0.26, &KrylovParams::default())?;
    let ideal = squeezing_record(&v, 0.26)?;
    let em = ErrorModel::detection_only(0.025, 0.01);
    let sl = detection_forward_shots(&sample_shots(&v, Readout::SpinLength, 50_000, 1)?, &em);
    let vs = detection_forward_shots(&sample_shots(&v, Readout::Variance { theta: ideal.theta_star }, 50_000, 2)?, &em);
    let (s1, s2) = (shot_statistics(&sl, 200)?, shot_statistics(&vs, 200)?);
    let raw = shot_squeezing(&s1, &s2, n);
    println!("ideal            xi2 = {:.4}", ideal.xi2);
    println!("raw              xi2 = {:.4} +- {:.4}", raw.xi2, raw.se_xi2);
    for mode in [InverseMode::Exact, InverseMode::NeglectMeanTheta] {
        let c = correct_squeezing(&s1, &s2, n, &em, mode)?;
        println!("{:<16} xi2 = {:.4}", format!("{mode:?}"), c.xi2_corrected);
    }
    Ok(())
}
