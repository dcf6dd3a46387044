//! Fundamental-solution convergence of the Crank-Nicolson solver and one
//! backward solve with variable coefficients.

use caloric_lab::numerics::SpaceTimeField;
use caloric_lab::suite::{kernel_errors, pinned_perturbed_run};

fn main() -> caloric_lab::Result<()> {
    let [coarse, fine] = kernel_errors()?;
    println!("kernel error at t = 0.1: h = 0.05 {coarse:.3e}, h = 0.025 {fine:.3e}, order {:.3}", (coarse / fine).log2());

    let u = pinned_perturbed_run(false)?;
    for x in [-0.5, 0.0, 0.5] {
        println!("u({x:+.1}, 0) = {:.6}", u.jet(&[x], 0.0).value);
    }
    Ok(())
}
