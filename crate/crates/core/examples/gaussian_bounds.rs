//! Two-sided Gaussian bounds for the discrete fundamental solution of a
//! divergence-form operator with oscillating coefficients.

use caloric_lab::certifiers::{gaussian_bounds_check, GaussianBoundsOptions};
use caloric_lab::numerics::{CoefficientField, CoefficientModel, SpaceTimeGrid};
use caloric_lab::solver::LowerOrder;

fn main() -> caloric_lab::Result<()> {
    let grid = SpaceTimeGrid::new(1, 6.0, 0.05, 1.0, 0.0025)?;
    let model = CoefficientModel::Perturbed { epsilon: 0.2, off_diagonal: 0.0, wavenumber: 2.0, frequency: 1.0 };
    let coefficients = CoefficientField::new(grid, model, 0.7, 1.0)?;
    let report = gaussian_bounds_check(&coefficients, LowerOrder::default(), &[0.0], 0.0, &GaussianBoundsOptions::default())?;
    println!("pass {} constant {:?}", report.pass, report.constant);
    for (k, v) in &report.details {
        println!("  {k}: {v}");
    }
    Ok(())
}
