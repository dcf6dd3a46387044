//! The full chain frequency bound → implied doubling → doubling →
//! two-sphere on a solver output, at two resolutions.

use std::sync::Arc;
use std::time::Instant;

use caloric_lab::numerics::{QuadratureRule, SpaceTimeField};
use caloric_lab::suite::{pinned_perturbed_run, run_pipeline};

fn main() -> caloric_lab::Result<()> {
    for refined in [false, true] {
        let start = Instant::now();
        let u: Arc<dyn SpaceTimeField> = Arc::new(pinned_perturbed_run(refined)?);
        let reports = run_pipeline(u, &QuadratureRule::default())?;
        println!("refined = {refined} ({:.1?})", start.elapsed());
        for r in reports.all() {
            println!("  {:<28} N = {:?} pass {}", r.inequality, r.constant, r.pass);
        }
    }
    Ok(())
}
