//! Two-sided evaluation of the quantitative inequalities and extraction of
//! the least constants that make them hold on a parameter grid.

mod decay;
mod doubling;
mod gaussian;
mod hardy;
mod muckenhoupt;
mod three_sphere;

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{ErrorKind, Result};
use crate::numerics::field::SpaceTimeField;
use crate::numerics::region::{ball_integral_of_degree, cylinder_integral_of_degree, square};

pub use decay::{decay_lemma_check, frequency_bound_at_zero, DecayOptions, FrequencyBoundOptions};
pub use doubling::{
    doubling_certificate, implied_doubling, space_time_doubling, two_sphere_one_cylinder, ImpliedDoublingOptions,
    SpaceTimeOptions,
};
pub use gaussian::{gaussian_bounds_check, GaussianBoundsOptions};
pub use hardy::hardy_check;
pub use muckenhoupt::{muckenhoupt_check, muckenhoupt_exponent, MuckenhouptOptions};
pub use three_sphere::{optimal_exponent, three_sphere_optimality, ThreeSphereOptions};

/// Search bracket for every minimal constant.
pub const CONSTANT_CAP: f64 = 1e6;
/// Ratio of the upward scan in self-consistent searches.
pub const SCAN_RATIO: f64 = 1.1;
/// A reported minimal constant must fail at `constant / MONOTONE_FACTOR`.
pub const MONOTONE_FACTOR: f64 = 1.05;
/// Relative error allowance for closed-form fields integrated by Gauss-Legendre.
pub const ANALYTIC_BUDGET: f64 = 1e-8;
/// Relative error allowance for sampled fields (cubic interpolation).
pub const SAMPLED_BUDGET: f64 = 1e-4;

/// Where the certified field came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub source: String,
    pub config_hash: Option<String>,
    pub version: String,
}

impl Provenance {
    pub fn new(source: impl Into<String>) -> Self {
        Self { source: source.into(), config_hash: None, version: env!("CARGO_PKG_VERSION").to_string() }
    }

    pub fn of(field: &dyn SpaceTimeField) -> Self {
        Self::new(field.label())
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }
}

/// Samples of both sides of one inequality and the constant extracted from
/// them; `pass` holds iff `lhs ≤ rhs + error_budget` at every sample (and
/// any side conditions recorded in `details` hold).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub inequality: String,
    pub params: Vec<BTreeMap<String, f64>>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub constant: Option<f64>,
    pub pass: bool,
    pub error_budget: f64,
    pub provenance: Provenance,
    pub details: BTreeMap<String, Value>,
}

impl CertificateReport {
    pub fn new(inequality: &str, provenance: Provenance) -> Self {
        Self {
            inequality: inequality.to_string(),
            params: Vec::new(),
            lhs: Vec::new(),
            rhs: Vec::new(),
            constant: None,
            pass: false,
            error_budget: 0.0,
            provenance,
            details: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, params: &[(&str, f64)], lhs: f64, rhs: f64) {
        self.params.push(params.iter().map(|(k, v)| (k.to_string(), *v)).collect());
        self.lhs.push(lhs);
        self.rhs.push(rhs);
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Sets `pass` from the samples and the extra condition.
    pub fn finish(&mut self, constant: Option<f64>, error_budget: f64, extra: bool) {
        self.constant = constant;
        self.error_budget = error_budget;
        let samples_hold = self.lhs.iter().zip(&self.rhs).all(|(l, r)| *l <= *r + error_budget);
        self.pass = extra && samples_hold;
    }

    pub fn with_config_hash(mut self, hash: &str) -> Self {
        self.provenance.config_hash = Some(hash.to_string());
        self
    }

    /// Concatenates the samples of several reports of one inequality; passes
    /// iff all of them do. Each part's details go under `parts`.
    pub fn merge(parts: Vec<CertificateReport>) -> Option<CertificateReport> {
        let mut iter = parts.into_iter();
        let mut out = iter.next()?;
        let mut details = vec![std::mem::take(&mut out.details)];
        for p in iter {
            out.params.extend(p.params);
            out.lhs.extend(p.lhs);
            out.rhs.extend(p.rhs);
            out.pass &= p.pass;
            out.error_budget = out.error_budget.max(p.error_budget);
            out.constant = match (out.constant, p.constant) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            details.push(p.details);
        }
        if details.len() == 1 {
            out.details = details.pop().unwrap_or_default();
        } else {
            out.detail("parts", details);
        }
        Some(out)
    }
}

/// Result of a minimal-constant search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantSearch {
    pub constant: f64,
    /// The predicate fails at `constant / 1.05` (vacuous when the constant is
    /// within 5% of the lower end).
    pub fails_below: bool,
    pub lower: f64,
    pub upper: f64,
}

fn no_constant(op: &'static str) -> crate::Error {
    ErrorKind::NoAdmissibleConstant { cap: CONSTANT_CAP }.at("certifiers", op)
}

/// Least `N ∈ [lower, CONSTANT_CAP]` with `holds(N)`, for a predicate that is
/// monotone in `N`, by bisection on `ln N`.
pub fn minimal_constant(
    lower: f64,
    holds: &dyn Fn(f64) -> Result<bool>,
    op: &'static str,
) -> Result<ConstantSearch> {
    let lower = lower.max(1.0);
    if holds(lower)? {
        return Ok(ConstantSearch { constant: lower, fails_below: true, lower, upper: CONSTANT_CAP });
    }
    if !holds(CONSTANT_CAP)? {
        return Err(no_constant(op));
    }
    bisect(lower, CONSTANT_CAP, holds).map(|c| finish_search(c, lower, CONSTANT_CAP, holds))?
}

fn bisect(lo: f64, hi: f64, holds: &dyn Fn(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi) = (lo.ln(), hi.ln());
    while hi - lo > 1e-10 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if holds(mid.exp())? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

fn finish_search(c: f64, lower: f64, upper: f64, holds: &dyn Fn(f64) -> Result<bool>) -> Result<ConstantSearch> {
    let below = c / MONOTONE_FACTOR;
    let fails_below = below < lower || !holds(below)?;
    Ok(ConstantSearch { constant: c, fails_below, lower, upper })
}

/// Least self-consistent `N`: scans `1.1^k` upward for the first `N` with
/// `holds(N)`, then bisects between it and its predecessor.
pub fn self_consistent_constant(holds: &dyn Fn(f64) -> Result<bool>, op: &'static str) -> Result<ConstantSearch> {
    let mut prev = 1.0;
    let mut n = 1.0;
    loop {
        if holds(n)? {
            if n == 1.0 {
                return Ok(ConstantSearch { constant: 1.0, fails_below: true, lower: 1.0, upper: 1.0 });
            }
            let c = bisect(prev, n, holds)?;
            return finish_search(c, prev, n, holds);
        }
        if n >= CONSTANT_CAP {
            return Err(no_constant(op));
        }
        prev = n;
        n = (n * SCAN_RATIO).min(CONSTANT_CAP);
    }
}

/// `∫_{B_r} u²(x, t)`.
pub fn ball_mass(u: &dyn SpaceTimeField, t: f64, r: f64) -> Result<f64> {
    let center = [0.0; 3];
    ball_integral_of_degree(u, t, &center[..u.dim()], r, &square, u.polynomial_degree().map(|p| 2 * p))
}

/// `∫_{Q_r} u²` with `Q_r = B_r × [0, r²]`.
pub fn cylinder_mass(u: &dyn SpaceTimeField, r: f64) -> Result<f64> {
    let center = [0.0; 3];
    cylinder_integral_of_degree(u, &center[..u.dim()], r, 0.0, None, &square, u.polynomial_degree().map(|p| 2 * p))
}

/// `Θ = ∫_{Q_4} u² / ∫_{B_1} u²(x, 0)` with its two integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaRatio {
    pub theta: f64,
    pub cylinder: f64,
    pub ball: f64,
}

/// `∫_{Q_4} u² / ∫_{B_ρ} u²(x, 0)`; `ρ = 1` gives `Θ`.
pub fn theta_ratio(u: &dyn SpaceTimeField, rho: f64, op: &'static str) -> Result<ThetaRatio> {
    let ball = ball_mass(u, 0.0, rho)?;
    if !(ball > 0.0) {
        return Err(ErrorKind::Degenerate(format!("∫_{{B_{rho}}} u²(x,0) = {ball}")).at("certifiers", op));
    }
    let cylinder = cylinder_mass(u, 4.0)?;
    Ok(ThetaRatio { theta: cylinder / ball, cylinder, ball })
}

/// `N log(NΘ)`.
pub fn log_scale(n: f64, theta: f64) -> f64 {
    n * (n * theta).ln()
}

/// Relative error allowance appropriate to the field's derivative source.
pub fn relative_budget(u: &dyn SpaceTimeField) -> f64 {
    if u.is_analytic() {
        ANALYTIC_BUDGET
    } else {
        SAMPLED_BUDGET
    }
}

/// Dyadic radii `2^{-1}, …, 2^{-levels}`.
pub fn dyadic(levels: u32) -> Vec<f64> {
    (1..=levels).map(|j| 0.5f64.powi(j as i32)).collect()
}

/// Drops radii (or `√a`) below two sampling spacings of a sampled field.
pub(crate) fn resolved(u: &dyn SpaceTimeField, scales: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let floor = if u.is_analytic() { 0.0 } else { 2.0 * u.feature_scale() };
    scales.iter().partition(|&&s| s >= floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_threshold() {
        let s = minimal_constant(1.0, &|n| Ok(n >= 37.0), "test").unwrap();
        assert!((s.constant - 37.0).abs() < 1e-6 && s.fails_below);
        assert_eq!(minimal_constant(1.0, &|_| Ok(true), "test").unwrap().constant, 1.0);
        assert!(minimal_constant(1.0, &|_| Ok(false), "test").is_err());
    }

    #[test]
    fn self_consistent_scan() {
        let s = self_consistent_constant(&|n| Ok(n >= 5.5), "test").unwrap();
        assert!((s.constant - 5.5).abs() < 1e-6);
        assert!(s.upper / s.lower <= SCAN_RATIO + 1e-12);
    }

    #[test]
    fn merge_concatenates_and_requires_all() {
        let mut a = CertificateReport::new("x", Provenance::new("t"));
        a.push(&[("a", 1.0)], 1.0, 2.0);
        a.finish(Some(2.0), 0.0, true);
        let mut b = a.clone();
        b.finish(Some(3.0), 0.0, false);
        let m = CertificateReport::merge(vec![a, b]).unwrap();
        assert_eq!(m.lhs.len(), 2);
        assert_eq!(m.constant, Some(3.0));
        assert!(!m.pass);
        assert!(m.details.contains_key("parts"));
    }

    #[test]
    fn pass_requires_every_sample() {
        let mut r = CertificateReport::new("x", Provenance::new("t"));
        r.push(&[("r", 0.5)], 1.0, 2.0);
        r.push(&[("r", 0.25)], 2.0 + 1e-9, 2.0);
        r.finish(None, 1e-8, true);
        assert!(r.pass);
        r.finish(None, 0.0, true);
        assert!(!r.pass);
    }
}
