//! Evaluates both sides of the weighted inequality for the pinned bump and
//! reports the least admissible constant under one refinement.

use std::time::Instant;

use caloric_lab::carleman::{carleman_inequality_eval, BumpField, CarlemanParams, InequalityQuadrature};
use caloric_lab::numerics::CoefficientModel;

fn main() -> caloric_lab::Result<()> {
    for alpha in [4.0, 8.0] {
        let params = CarlemanParams::pinned(alpha)?;
        let bump = BumpField::pinned(1, alpha)?;
        let coarse = InequalityQuadrature::default();
        let start = Instant::now();
        let a = carleman_inequality_eval(&bump, &CoefficientModel::Identity, &params, bump.duration(), &coarse)?;
        let b = carleman_inequality_eval(&bump, &CoefficientModel::Identity, &params, bump.duration(), &coarse.refined())?;
        println!(
            "α = {alpha}: N* = {:.6} -> {:.6} (change {:.2e}), minimal {} ({:.2?})",
            a.n_star,
            b.n_star,
            (b.n_star - a.n_star).abs() / a.n_star,
            b.minimal,
            start.elapsed()
        );
        println!("  log terms: mass {:.4} grad {:.4} operator {:.4} energy {:.4}",
            b.terms.weighted_mass.log, b.terms.weighted_gradient.log, b.terms.operator.log, b.terms.energy.log);
    }
    Ok(())
}
