//! Full pipeline on a 3x3 array: preparation, XY evolution, hole and
//! readout errors, shot sampling, and detection correction.

use xy_squeeze::analysis::config::TimeGrid;
use xy_squeeze::analysis::{simulate, RunConfig};
use xy_squeeze::lattice::LatticeSpec;

fn main() -> xy_squeeze::Result<()> {
    let cfg = RunConfig {
        lattice: LatticeSpec::square(3, 3, 15.0),
        time: TimeGrid::uniform(0.0, 0.6, 0.05),
        shots: 2000,
        seed: 7,
        ..RunConfig::default()
    };
    let sim = simulate(&cfg)?;
    println!("{:>6} {:>9} {:>9} {:>9} {:>12}", "t (us)", "ideal dB", "raw dB", "corr dB", "shots dB");
    for r in &sim.rows {
        let shot = r.shot_corr_xi2_db.map_or("-".to_string(), |d| format!("{d:+.2}"));
        println!("{:>6.2} {:>+9.2} {:>+9.2} {:>+9.2} {:>12}", r.t_us, r.xi2_db, r.raw_xi2_db, r.corr_xi2_db, shot);
    }
    for (name, o) in [("ideal", sim.optima.exact), ("raw", sim.optima.raw), ("corrected", sim.optima.corrected)] {
        if let Some(o) = o {
            println!("{name:>9}: {:+.2} dB at {:.3} us", o.xi2_db, o.t_us);
        }
    }
    Ok(())
}
