//! Gaussian Hardy inequality on a few exact solutions.

use caloric_lab::certifiers::hardy_check;
use caloric_lab::numerics::QuadratureRule;
use caloric_lab::oracles::find;

fn main() -> caloric_lab::Result<()> {
    let rule = QuadratureRule::default();
    for name in ["x1", "heat3", "harm_re2_n2", "gauss_bwd_b2_n3"] {
        let u = find(name)?;
        for a in [0.25, 1.0, 4.0] {
            let r = hardy_check(&*u, 0.0, a, &rule)?;
            println!("{name:<16} a = {a:<4} pass {} lhs {:.6e} rhs {:.6e}", r.pass, r.lhs[0], r.rhs[0]);
        }
    }
    Ok(())
}
