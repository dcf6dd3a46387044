use serde::{Deserialize, Serialize};

use super::{minimal_constant, CertificateReport, Provenance};
use crate::error::{ErrorKind, Result};
use crate::numerics::coefficients::CoefficientField;
use crate::numerics::grid::MAX_DIM;
use crate::solver::{fundamental_solution, LowerOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianBoundsOptions {
    /// Evaluation times, which must be time levels at least `4Δt` after `s`.
    pub times: Vec<f64>,
    /// Nodes where `G` is below `noise · max G` are ignored.
    pub noise: f64,
}

impl Default for GaussianBoundsOptions {
    fn default() -> Self {
        Self { times: vec![0.1, 0.25, 0.5, 1.0], noise: 1e-6 }
    }
}

/// Least `N ≥ 1` with
/// `N^{-1}τ^{-n/2}e^{-N|x-y|²/τ} ≤ G(x,t;y,s) ≤ Nτ^{-n/2}e^{-|x-y|²/(Nτ)}`,
/// `τ = t - s`, on the nodes with `|x-y| ≤ 4√τ √log(1/noise)` where the
/// discrete fundamental solution is above the noise floor.
pub fn gaussian_bounds_check(
    coefficients: &CoefficientField,
    lower: LowerOrder,
    source: &[f64],
    source_time: f64,
    opts: &GaussianBoundsOptions,
) -> Result<CertificateReport> {
    let op = "gaussian_bounds";
    let g = fundamental_solution(coefficients, lower, source, source_time)?;
    let grid = *g.field().grid();
    let n = grid.dim();
    let dt = grid.time_step();
    // (time, ln τ^{n/2} G, d²/τ) per retained node
    let mut samples: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for &t in &opts.times {
        let tau = t - source_time;
        if tau < g.valid_from() - source_time - 1e-12 {
            return Err(ErrorKind::Precondition(format!("t - s = {tau} is closer than 4Δt to the source"))
                .at("certifiers", op));
        }
        let level = (t / dt).round() as usize;
        if ((t / dt) - level as f64).abs() > 1e-6 {
            return Err(ErrorKind::Precondition(format!("t = {t} is not a time level")).at("certifiers", op));
        }
        let slice = g.slice(level)?;
        let peak = slice.iter().copied().fold(0.0, f64::max);
        let reach = 4.0 * tau.sqrt() * (1.0 / opts.noise).ln().sqrt();
        let mut x = [0.0; MAX_DIM];
        let mut rows = Vec::new();
        for (i, &v) in slice.iter().enumerate() {
            grid.node_point(i, &mut x[..n]);
            let d2: f64 = (0..n).map(|d| (x[d] - source[d]).powi(2)).sum();
            if d2.sqrt() <= reach && v > opts.noise * peak {
                rows.push(((v * tau.powf(0.5 * n as f64)).ln(), d2 / tau));
            }
        }
        samples.push((t, rows));
    }
    // ln N ≥ ln g + q/N  and  -ln N - N q ≤ ln g, with ln g = ln(τ^{n/2}G), q = d²/τ
    let holds = |big: f64| -> Result<bool> {
        let ln = big.ln();
        Ok(samples.iter().all(|(_, rows)| rows.iter().all(|&(lg, q)| lg <= ln - q / big && -ln - big * q <= lg)))
    };
    let search = minimal_constant(1.0, &holds, op)?;
    let big = search.constant;
    let mut report = CertificateReport::new(op, Provenance::new(format!("fundamental solution at {source:?}, s = {source_time}")));
    for (t, rows) in &samples {
        let upper = rows.iter().map(|&(lg, q)| lg - (big.ln() - q / big)).fold(f64::NEG_INFINITY, f64::max);
        let lower = rows.iter().map(|&(lg, q)| (-big.ln() - big * q) - lg).fold(f64::NEG_INFINITY, f64::max);
        report.push(&[("t", *t), ("bound", 1.0)], upper, 0.0);
        report.push(&[("t", *t), ("bound", 2.0)], lower, 0.0);
    }
    report.detail("sides", "log ratio of G to each bound (bound 1 upper, 2 lower); holds when ≤ 0");
    report.detail("search", search);
    report.detail("nodes", samples.iter().map(|(t, r)| (*t, r.len())).collect::<Vec<_>>());
    report.finish(Some(big), 1e-12, search.fails_below);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::SpaceTimeGrid;

    #[test]
    fn heat_kernel_envelope() {
        let grid = SpaceTimeGrid::new(1, 6.0, 0.05, 1.0, 0.0025).unwrap();
        let coeff = CoefficientField::identity(grid);
        let r = gaussian_bounds_check(&coeff, LowerOrder::default(), &[0.0], 0.0, &GaussianBoundsOptions::default()).unwrap();
        let n = r.constant.unwrap();
        // exact kernel: upper needs N ≥ 4, lower needs N ≥ √(4π)
        assert!(n > 3.5 && n < 5.0, "{n}");
        assert!(r.pass);
    }

    #[test]
    fn source_time_is_rejected() {
        let grid = SpaceTimeGrid::new(1, 6.0, 0.05, 1.0, 0.0025).unwrap();
        let coeff = CoefficientField::identity(grid);
        let opts = GaussianBoundsOptions { times: vec![0.0], ..Default::default() };
        assert!(gaussian_bounds_check(&coeff, LowerOrder::default(), &[0.0], 0.0, &opts).is_err());
    }
}
