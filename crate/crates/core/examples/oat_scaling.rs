//! One-axis twisting in the symmetric subspace up to N = 1024 with
//! fixed chi N, and the resulting power laws.

use xy_squeeze::analysis::oat_scaling;

fn main() -> xy_squeeze::Result<()> {
    let sizes = [8, 16, 32, 64, 128, 256, 512, 1024];
    let o = oat_scaling(&sizes, 1.19)?;
    for r in &o.rows {
        println!("N = {:>4}: {:+.2} dB at {:.3} us", r.n_atoms, r.xi2_db, r.t_us);
    }
    println!("nu = {:.3} +- {:.3}, mu = {:.3} +- {:.3}", o.fit.nu.value, o.fit.nu.se, o.fit.mu.value, o.fit.mu.se);
    Ok(())
}
