//! Classical point cloud with N = 400: continuous twisting against one
//! intermediate realignment.

use xy_squeeze::analysis::{semiclassical_run, RunConfig};

fn main() -> xy_squeeze::Result<()> {
    let cfg = RunConfig::default();
    let r = semiclassical_run(&cfg)?;
    println!("chi = {:.5} MHz, J~ = {:.3} rad/us", r.chi_mhz, r.j_tilde);
    for (s, m) in r.single.iter().zip(&r.multi).step_by(10) {
        println!("{:.2} us  single {:+6.2} dB  multi {:+6.2} dB", s.t_us, s.xi2_proxy_db, m.xi2_proxy_db);
    }
    for (name, o) in [("single", r.single_optimum), ("multi", r.multi_optimum)] {
        if let Some(o) = o {
            println!("{name}: {:+.2} dB at {:.3} us", o.xi2_db, o.t_us);
        }
    }
    println!("rotation {:.3} rad at {:.3} us", r.angle_rad, r.t_rotate_us);
    Ok(())
}
