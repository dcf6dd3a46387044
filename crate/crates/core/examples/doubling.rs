//! Doubling ratios of harmonic polynomials, which saturate `2^{2k+n}`.

use caloric_lab::certifiers::{ball_mass, doubling_certificate, dyadic};
use caloric_lab::numerics::SpaceTimeField;
use caloric_lab::oracles::catalog;

fn main() -> caloric_lab::Result<()> {
    for o in catalog().iter().filter(|o| o.harmonic_degree().is_some()) {
        let k = o.harmonic_degree().unwrap_or(0);
        let exact = 2f64.powi((2 * k + o.dim() as u32) as i32);
        let mut worst: f64 = 0.0;
        for r in dyadic(6) {
            let ratio = ball_mass(&**o, 0.0, 2.0 * r)? / ball_mass(&**o, 0.0, r)?;
            worst = worst.max((ratio / exact - 1.0).abs());
        }
        let cert = doubling_certificate(&**o, &dyadic(6))?;
        println!("{:<18} 2^(2k+n) = {exact:<6} max rel dev {worst:.1e}, certified N = {:?}", o.name(), cert.constant);
    }
    Ok(())
}
