use super::{CertificateReport, Provenance};
use crate::error::{ErrorKind, Result};
use crate::numerics::field::SpaceTimeField;
use crate::numerics::quadrature::{weighted_integrals, IntegrandKind, QuadratureRule};
use crate::numerics::weight::GaussianWeight;

/// Identity residual allowed by [`hardy_check`].
pub const HARDY_TOLERANCE: f64 = 1e-8;

/// Weighted Hardy inequality for the slice `h = u(·, t)` against
/// `e^{-|x|²/4a}`, together with the identity that closes it:
/// `RHS - LHS = 2a ∫ |∇v|²`, `v = h e^{-|x|²/8a}`.
///
/// All integrals share the factor `a^{n/2}` relative to `G_a(x, 0)`; it is
/// dropped.
pub fn hardy_check(u: &dyn SpaceTimeField, t: f64, a: f64, rule: &QuadratureRule) -> Result<CertificateReport> {
    if !(a > 0.0) {
        return Err(ErrorKind::Precondition(format!("a = {a} must be positive")).at("certifiers", "hardy"));
    }
    let n = u.dim();
    let weight = GaussianWeight::new(n, a - t)?;
    let shift = 0.25 / a;
    let gap_integrand = IntegrandKind::custom(move |x: &[f64], jet| {
        x.iter().enumerate().map(|(i, xi)| (jet.gradient[i] - shift * xi * jet.value).powi(2)).sum()
    });
    let kinds = [IntegrandKind::ValueSq, IntegrandKind::GradSq, IntegrandKind::DistPowValueSq(2.0), gap_integrand];
    let q = weighted_integrals(u, t, &weight, &kinds, rule)?;
    let (h, d, m2, v) = (q[0], q[1], q[2], q[3]);
    let lhs = m2.value / (8.0 * a);
    let rhs = 2.0 * a * d.value + 0.5 * n as f64 * h.value;
    let gap = 2.0 * a * v.value;
    let scale = lhs.abs().max(rhs.abs());
    let residual = if scale > 0.0 { (rhs - lhs - gap).abs() / scale } else { 0.0 };
    let budget = m2.error() / (8.0 * a) + 2.0 * a * d.error() + 0.5 * n as f64 * h.error();

    let mut report = CertificateReport::new("hardy", Provenance::of(u));
    report.push(&[("a", a), ("t", t)], lhs, rhs);
    report.detail("gap", gap);
    report.detail("identity_residual", residual);
    report.detail("identity_tolerance", HARDY_TOLERANCE);
    report.detail("normalization", "integrals against G_a(x,0) = a^{-n/2} e^{-|x|^2/4a}");
    report.finish(None, budget, residual <= HARDY_TOLERANCE);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::find;
    use std::f64::consts::PI;

    fn rule() -> QuadratureRule {
        QuadratureRule { tol: 1e-11, ..Default::default() }
    }

    #[test]
    fn constant_closed_form() {
        let u = find("const1").unwrap();
        let r = hardy_check(&*u, 0.0, 0.25, &rule()).unwrap();
        // against e^{-x²}: LHS = √π/4, RHS = √π/2; G_a differs by a^{-1/2} = 2
        let lhs = r.lhs[0] * 0.5;
        let rhs = r.rhs[0] * 0.5;
        assert!((lhs - PI.sqrt() / 4.0).abs() < 1e-9, "{lhs}");
        assert!((rhs - PI.sqrt() / 2.0).abs() < 1e-9);
        assert!(r.pass);
    }

    #[test]
    fn linear_identity() {
        let u = find("x1").unwrap();
        let r = hardy_check(&*u, 0.0, 1.0, &rule()).unwrap();
        assert!(r.details["identity_residual"].as_f64().unwrap() <= 1e-8);
        assert!(r.pass);
    }

    #[test]
    fn rejects_nonpositive_offset() {
        let u = find("x1").unwrap();
        assert!(hardy_check(&*u, 0.0, 0.0, &rule()).is_err());
    }
}
