//! Lists the exact solutions and audits their declared flags.

use caloric_lab::numerics::SpaceTimeField;
use caloric_lab::oracles::{audit_catalog, catalog};

fn main() -> caloric_lab::Result<()> {
    for o in catalog() {
        let f = o.flags();
        println!(
            "{:<20} n={} caloric={:<5} harmonic={:<5} degree={:?}  {}",
            o.name(),
            o.dim(),
            f.backward_caloric,
            f.harmonic,
            f.parabolic_degree,
            o.formula()
        );
    }
    let audits = audit_catalog()?;
    println!("{} oracles audited", audits.len());
    Ok(())
}
