//! One intermediate rotation about y realigns the squeezed ellipse and
//! deepens the optimum on a 3x3 array.

use xy_squeeze::analysis::config::TimeGrid;
use xy_squeeze::analysis::{multistep_experiment, RunConfig};
use xy_squeeze::lattice::LatticeSpec;

fn main() -> xy_squeeze::Result<()> {
    let mut cfg = RunConfig::default().ideal();
    cfg.lattice = LatticeSpec::square(3, 3, 15.0);
    cfg.shots = 0;
    cfg.time = TimeGrid::uniform(0.0, 1.0, 0.05);
    let m = multistep_experiment(&cfg)?;
    println!("rotation {:.3} rad at {:.2} us", m.angle_rad, m.t_rotate_us);
    for (s, x) in m.single.iter().zip(&m.multi) {
        println!("{:.2} us  single {:+6.2} dB  multi {:+6.2} dB", s.t_us, s.xi2_db, x.xi2_db);
    }
    for (name, o) in [("single", m.single_optimum), ("multi", m.multi_optimum)] {
        if let Some(o) = o {
            println!("{name}: {:+.2} dB at {:.3} us", o.xi2_db, o.t_us);
        }
    }
    Ok(())
}
