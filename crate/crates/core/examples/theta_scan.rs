//! Variance versus readout angle on a 3x3 array, with the sinusoid fit
//! compared to the exact minimizing angle.

use xy_squeeze::analysis::{theta_scan, RunConfig};
use xy_squeeze::lattice::LatticeSpec;

fn main() -> xy_squeeze::Result<()> {
    let mut cfg = RunConfig::default().ideal();
    cfg.lattice = LatticeSpec::square(3, 3, 15.0);
    cfg.shots = 4000;
    cfg.analysis.theta_points = 24;
    let scan = theta_scan(&cfg, Some(0.3))?;
    for r in &scan.rows {
        let bar = "#".repeat((20.0 * r.var_norm).round().clamp(0.0, 80.0) as usize);
        println!("{:+.3}  {:.3} +- {:.3}  {bar}", r.theta, r.var_norm, 4.0 * r.se / scan.n_atoms as f64);
    }
    println!(
        "fitted theta* = {:.4} +- {:.4}, exact {:.4}",
        scan.fit.theta_min, scan.fit.se_theta, scan.exact_theta_star
    );
    Ok(())
}
