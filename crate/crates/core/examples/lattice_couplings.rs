//! Dipolar couplings of square arrays and the collective twisting rate they imply.

use xy_squeeze::lattice::{Boundary, LatticeSpec};

fn main() -> xy_squeeze::Result<()> {
    let j = 0.25;
    println!("{:>5} {:>8} {:>10} {:>10} {:>10}", "array", "boundary", "sum J_ij", "chi (MHz)", "chi N");
    for side in [2, 3, 4, 5] {
        for b in [Boundary::Open, Boundary::Periodic] {
            let spec = LatticeSpec::square(side, side, 15.0).with_boundary(b);
            let cm = spec.coupling_matrix()?;
            // chi = 1/(2I): mean pair coupling over the symmetric sector
            let chi = cm.rotor_chi(j)?;
            let n = spec.n_atoms();
            println!(
                "{:>5} {:>8} {:>10.4} {:>10.5} {:>10.4}",
                format!("{side}x{side}"),
                format!("{b:?}"),
                cm.pair_sum(),
                chi,
                chi * n as f64
            );
        }
    }
    Ok(())
}
