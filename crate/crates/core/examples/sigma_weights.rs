//! Tabulates the Carleman weight `σ` and checks the equation it solves.

use std::time::Instant;

use caloric_lab::carleman::{check_sigma_ode, sigma_table};

fn main() -> caloric_lab::Result<()> {
    for gamma in [8.0, 32.0] {
        let start = Instant::now();
        let table = sigma_table(gamma, 256, 1e-12)?;
        println!(
            "γ = {gamma}: N_σ = {:.6}, σ ≤ t: {}, nondecreasing: {} ({:.2?})",
            table.n_sigma,
            table.below_identity,
            table.nondecreasing,
            start.elapsed()
        );
        let start = Instant::now();
        let ode = check_sigma_ode(gamma, 24, 1e-13)?;
        println!("  σ equation: max residual {:.3e}, pass {} ({:.2?})", ode.max_relative_residual, ode.pass, start.elapsed());
    }
    Ok(())
}
