//! Krylov propagation checked against dense diagonalization on a 3x3 array,
//! then pushed to 4x4 where only the Krylov path is practical.

use std::time::Instant;

use xy_squeeze::dense::DenseOracle;
use xy_squeeze::krylov::{evolve_checkpoints, KrylovParams};
use xy_squeeze::lattice::LatticeSpec;
use xy_squeeze::measurement::squeezing_record;
use xy_squeeze::operators::Hamiltonian;
use xy_squeeze::protocols::prepare_coherent_y;

fn xy(side: usize) -> xy_squeeze::Result<Hamiltonian> {
    Ok(Hamiltonian::Xy { j_mhz: 0.25, couplings: LatticeSpec::square(side, side, 15.0).coupling_matrix()? })
}

fn main() -> xy_squeeze::Result<()> {
    let times: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
    let h = xy(3)?;
    let v0 = prepare_coherent_y(9);
    let states = evolve_checkpoints(&h, &v0, &times, &KrylovParams::default())?;
    let oracle = DenseOracle::new(&h)?;
    for (t, v) in times.iter().zip(&states) {
        let infidelity = 1.0 - v.fidelity(&oracle.evolve(&v0, *t)?);
        println!("3x3 t = {t:.2} us  1 - F = {infidelity:.2e}");
    }

    let start = Instant::now();
    let states = evolve_checkpoints(&xy(4)?, &prepare_coherent_y(16), &times, &KrylovParams::default())?;
    println!("4x4: {} checkpoints in {:.1} s", states.len(), start.elapsed().as_secs_f64());
    for (t, v) in times.iter().zip(&states) {
        let r = squeezing_record(v, *t)?;
        println!("4x4 t = {t:.2} us  xi2 = {:.4} ({:+.2} dB)", r.xi2, r.xi2_db);
    }
    Ok(())
}
