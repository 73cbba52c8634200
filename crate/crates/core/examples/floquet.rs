//! WAHUHA cycles inserted at the squeezing optimum of a 3x3 array hold the
//! squeezed state while the free XY evolution over-twists it.

use xy_squeeze::analysis::config::TimeGrid;
use xy_squeeze::analysis::{floquet_experiment, RunConfig};
use xy_squeeze::lattice::LatticeSpec;

fn main() -> xy_squeeze::Result<()> {
    let mut cfg = RunConfig::default().ideal();
    cfg.lattice = LatticeSpec::square(3, 3, 15.0);
    cfg.shots = 0;
    cfg.time = TimeGrid::uniform(0.0, 1.2, 0.05);
    let f = floquet_experiment(&cfg, &[0, 1, 2, 3])?;
    println!("cycles start at {:.3} us, period {:.2} us", f.t_start_us, cfg.floquet.period_us);
    for s in &f.series {
        let best = s.records.iter().map(|r| r.xi2_db).fold(f64::INFINITY, f64::min);
        println!(
            "n = {}: squeezed for {:.3} us{}, best {best:+.2} dB",
            s.n_cycles,
            s.squeezed_duration_us,
            if s.censored { "+" } else { "" }
        );
    }
    let d = &f.diagnostics;
    println!(
        "per cycle: |Jy| change {:.4}, free evolution {:.4}, infidelity to the average {:.2e}",
        d.cycle_change, d.free_change, d.infidelity
    );
    Ok(())
}
