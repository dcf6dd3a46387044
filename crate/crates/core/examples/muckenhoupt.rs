//! Reverse Hölder and A_p checks for `u²` of a few solutions.

use caloric_lab::certifiers::{muckenhoupt_check, muckenhoupt_exponent, MuckenhouptOptions};
use caloric_lab::numerics::SpaceTimeField;
use caloric_lab::oracles::find;

fn main() -> caloric_lab::Result<()> {
    for name in ["x1", "heat2", "harm_re3_n2", "harm_zonal_n3"] {
        let u = find(name)?;
        let (p, flagged) = muckenhoupt_exponent(u.dim());
        let r = muckenhoupt_check(&*u, &MuckenhouptOptions::default())?;
        println!("{name:<14} p = {p}{} pass {} constant {:?}", if flagged { " (flagged)" } else { "" }, r.pass, r.constant);
    }
    Ok(())
}
