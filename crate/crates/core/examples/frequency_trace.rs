//! Frequency trace of a backward heat polynomial, printed as CSV.

use caloric_lab::frequency::{trace, write_trace_csv};
use caloric_lab::numerics::{GaussianWeight, QuadratureRule};
use caloric_lab::oracles::find;

fn main() -> caloric_lab::Result<()> {
    let u = find("heat4")?;
    let weight = GaussianWeight::new(1, 0.1)?;
    let times: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
    let tr = trace(&*u, &weight, &times, &QuadratureRule::default())?;
    write_trace_csv(&tr, std::io::stdout())?;
    let worst = tr.n_dot.iter().cloned().fold(f64::INFINITY, f64::min);
    eprintln!("min Ndot = {worst:.3e}");
    Ok(())
}
