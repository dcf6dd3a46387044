use serde::{Deserialize, Serialize};

use super::{CertificateReport, Provenance};
use crate::error::{ErrorKind, Result};
use crate::numerics::field::SpaceTimeField;
use crate::oracles::{catalog, harmonic_ball_identity, OracleSolution};

/// `θ*(r) = log 4 / log(4/r)`.
pub fn optimal_exponent(r: f64) -> f64 {
    4f64.ln() / (4.0 / r).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreeSphereOptions {
    pub dim: usize,
    pub max_degree: u32,
    pub radii: Vec<f64>,
    /// The constant `N` in `∫_{B_1}u² ≤ (∫_{B_r}u²)^θ (N∫_{B_4}u²)^{1-θ}`.
    pub n: f64,
    /// Exponents `factor · θ*(r)` must be violated by some degree.
    pub factor: f64,
}

impl Default for ThreeSphereOptions {
    fn default() -> Self {
        Self { dim: 2, max_degree: 6, radii: vec![0.125, 0.25, 0.5, 0.75], n: 2.0, factor: 1.05 }
    }
}

/// Relative tolerance for the ball-sphere identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

fn harmonic_of_degree(dim: usize, k: u32) -> Option<&'static OracleSolution> {
    let mut found: Vec<&OracleSolution> =
        catalog().iter().map(|o| &**o).filter(|o| o.dim() == dim && o.harmonic_degree() == Some(k)).collect();
    found.sort_by(|a, b| a.name().cmp(b.name()));
    found.first().copied()
}

/// For homogeneous harmonic `u` of degree `k` the three-ball inequality
/// reduces to `1/4 ≤ (r/4)^θ N^{(1-θ)/(2k+n)}`, which holds at `θ*(r)` and
/// fails for larger `θ` once `k` is large. Checks the identity behind the
/// reduction, the inequality at `θ*`, and finds the degree witnessing the
/// failure at `factor · θ*`.
pub fn three_sphere_optimality(opts: &ThreeSphereOptions) -> Result<CertificateReport> {
    let op = "three_sphere_optimality";
    if opts.radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) || !(opts.n >= 1.0) || !(opts.factor > 1.0) {
        return Err(ErrorKind::Precondition("need 0 < r < 1, N ≥ 1 and factor > 1".into()).at("certifiers", op));
    }
    let mut oracles = Vec::new();
    for k in 1..=opts.max_degree {
        if let Some(o) = harmonic_of_degree(opts.dim, k) {
            oracles.push((k, o));
        }
    }
    if oracles.is_empty() {
        return Err(ErrorKind::Precondition(format!("no harmonic oracle in dimension {}", opts.dim)).at("certifiers", op));
    }
    let mut report = CertificateReport::new(op, Provenance::new(format!("harmonic oracles, n = {}", opts.dim)));
    let mut identity = Vec::new();
    let mut worst_identity: f64 = 0.0;
    let mut witnesses = Vec::new();
    let mut all_witnessed = true;
    for &r in &opts.radii {
        let theta = optimal_exponent(r);
        let raised = opts.factor * theta;
        let mut witness = None;
        for &(k, o) in &oracles {
            let (ball_r, closed) = harmonic_ball_identity(o, r)?;
            let residual = (ball_r - closed).abs() / closed.abs();
            worst_identity = worst_identity.max(residual);
            identity.push(serde_json::json!({ "oracle": o.name(), "k": k, "r": r, "residual": residual }));
            let ball_1 = harmonic_ball_identity(o, 1.0)?.0;
            let ball_4 = harmonic_ball_identity(o, 4.0)?.0;
            let log_rhs = |th: f64| th * ball_r.ln() + (1.0 - th) * (opts.n.ln() + ball_4.ln());
            report.push(&[("r", r), ("k", k as f64), ("theta", theta)], ball_1.ln(), log_rhs(theta));
            if witness.is_none() && ball_1.ln() > log_rhs(raised) {
                witness = Some(k);
            }
        }
        all_witnessed &= witness.is_some();
        witnesses.push(serde_json::json!({ "r": r, "theta_star": theta, "theta": raised, "witness_k": witness }));
    }
    report.detail("identity", identity);
    report.detail("identity_max_residual", worst_identity);
    report.detail("violations", witnesses);
    report.detail("sides", "log ∫_{B_1}u² against θ log ∫_{B_r}u² + (1-θ) log(N ∫_{B_4}u²)");
    report.detail("n", opts.n);
    let constant = opts.radii.iter().find(|&&r| r == 0.25).map(|&r| optimal_exponent(r));
    report.finish(constant, 1e-9, worst_identity <= IDENTITY_TOLERANCE && all_witnessed);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_formula() {
        assert_eq!(optimal_exponent(0.25), 0.5);
        assert!((optimal_exponent(1.0 - 1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn witnesses_exist() {
        let r = three_sphere_optimality(&ThreeSphereOptions::default()).unwrap();
        assert!(r.pass, "{:?}", r.details);
        assert_eq!(r.constant, Some(0.5));
    }
}
