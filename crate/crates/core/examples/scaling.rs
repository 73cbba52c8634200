//! Optimal squeezing and its time for 2x2, 3x3 and 4x4 arrays, with
//! power-law fits over the three sizes.

use xy_squeeze::analysis::config::TimeGrid;
use xy_squeeze::analysis::{scaling_sweep, RunConfig};

fn main() -> xy_squeeze::Result<()> {
    let mut cfg = RunConfig::default().ideal();
    cfg.shots = 0;
    cfg.time = TimeGrid::uniform(0.0, 0.5, 0.02);
    let s = scaling_sweep(&cfg)?;
    for row in &s.sizes {
        if let Some(o) = row.exact {
            println!("N = {:>2}: {:+.3} dB at {:.3} us", row.n_atoms, o.xi2_db, o.t_us);
        }
    }
    if let Some(f) = s.exact {
        println!("nu = {:.3} +- {:.3}, mu = {:.3} +- {:.3}", f.nu.value, f.nu.se, f.mu.value, f.mu.se);
        println!("reference nu = {:.2}, mu = {:.2}", s.reference_nu.value, s.reference_mu.value);
    }
    Ok(())
}
