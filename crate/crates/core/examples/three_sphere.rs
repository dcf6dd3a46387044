//! The three-sphere exponent `ln 4 / ln(4/r)` cannot be improved.

use caloric_lab::certifiers::{optimal_exponent, three_sphere_optimality, ThreeSphereOptions};

fn main() -> caloric_lab::Result<()> {
    let opts = ThreeSphereOptions::default();
    for &r in &opts.radii {
        println!("theta*({r}) = {:.6}", optimal_exponent(r));
    }
    let report = three_sphere_optimality(&opts)?;
    println!("pass {} details {}", report.pass, serde_json::to_string_pretty(&report.details).unwrap_or_default());
    Ok(())
}
