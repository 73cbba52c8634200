//! Entanglement-depth bounds and where a 3x3 trajectory falls against them.

use xy_squeeze::analysis::config::TimeGrid;
use xy_squeeze::analysis::{sm_bounds, RunConfig};
use xy_squeeze::lattice::LatticeSpec;

fn main() -> xy_squeeze::Result<()> {
    let mut cfg = RunConfig::default().ideal();
    cfg.lattice = LatticeSpec::square(3, 3, 15.0);
    cfg.time = TimeGrid::uniform(0.0, 0.6, 0.05);
    let s = sm_bounds(&cfg)?;
    for c in &s.curves {
        let at = |x: f64| c.min_variance_at(x).map_or("-".into(), |v| format!("{v:.4}"));
        println!("k = {:>2}: bound at 2|Jy|/N = 0.5, 0.8, 0.95: {}, {}, {}", c.k, at(0.5), at(0.8), at(0.95));
    }
    for p in &s.trajectory {
        let k = p.depth_exceeds.map_or("-".into(), |k| format!("> {k}"));
        println!("{:.2} us  ({:.4}, {:.4})  depth {k}", p.t_us, p.mean_fraction, p.var_norm);
    }
    Ok(())
}
