use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::doubling::{gaussian_moments, hypothesis_grid};
use super::{ball_mass, dyadic, log_scale, relative_budget, resolved, self_consistent_constant, theta_ratio};
use super::{CertificateReport, Provenance};
use crate::error::{ErrorKind, Result};
use crate::frequency::cutoff::CutoffField;
use crate::numerics::field::SpaceTimeField;
use crate::numerics::quadrature::QuadratureRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayOptions {
    /// Radii `ρ`; `ρ = 1` is the constant-coefficient statement.
    pub rho: Vec<f64>,
    /// Samples of `(0, window]` checked for each candidate `N`.
    pub time_samples: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { rho: vec![1.0], time_samples: 8 }
    }
}

impl DecayOptions {
    /// The sweep `ρ ∈ {1, 1/2, 1/4}`.
    pub fn sweep() -> Self {
        Self { rho: vec![1.0, 0.5, 0.25], ..Self::default() }
    }
}

/// `N ∫_{B_2ρ} u²(x,t) ≥ ∫_{B_ρ} u²(x,0)` for `0 < t ≤ ρ²/(N log(NΩ_ρ))`,
/// `Ω_ρ = ∫_{Q_4}u² / ρ²∫_{B_ρ}u²(x,0)`, with the least self-consistent `N`
/// for each `ρ`.
pub fn decay_lemma_check(u: &dyn SpaceTimeField, opts: &DecayOptions) -> Result<CertificateReport> {
    let op = "decay_lemma";
    if opts.rho.is_empty() || opts.rho.iter().any(|&r| !(r > 0.0 && r <= 1.0)) || opts.time_samples == 0 {
        return Err(ErrorKind::Precondition("need ρ ∈ (0, 1] and at least one time sample".into()).at("certifiers", op));
    }
    let (_, horizon) = u.time_domain();
    let mut report = CertificateReport::new(op, Provenance::of(u));
    let mut worst: f64 = 1.0;
    let mut monotone = true;
    let mut per_rho = Vec::new();
    for &rho in &opts.rho {
        let base = theta_ratio(u, rho, op)?;
        let omega = base.theta / (rho * rho);
        let initial = base.ball;
        let window = |n: f64| rho * rho / log_scale(n, omega);
        let times = |n: f64| -> Vec<f64> {
            let w = window(n).min(horizon);
            (1..=opts.time_samples).map(|j| w * j as f64 / opts.time_samples as f64).collect()
        };
        let holds = |n: f64| -> Result<bool> {
            if log_scale(n, omega) < 1.0 {
                return Ok(false);
            }
            for t in times(n) {
                if n * ball_mass(u, t, 2.0 * rho)? < initial {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let search = self_consistent_constant(&holds, op)?;
        let n = search.constant;
        monotone &= search.fails_below;
        worst = worst.max(n);
        for t in times(n) {
            report.push(&[("rho", rho), ("t", t)], initial, n * ball_mass(u, t, 2.0 * rho)?);
        }
        per_rho.push(serde_json::json!({ "rho": rho, "omega": omega, "n": n, "window": window(n), "search": search }));
    }
    report.detail("per_rho", per_rho);
    let budget = relative_budget(u) * report.lhs.iter().copied().fold(0.0, f64::max);
    report.finish(Some(worst), budget, monotone);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyBoundOptions {
    pub rho: f64,
    /// Geometric levels below `1/(12 N log NΘ_ρ)`.
    pub a_levels: u32,
    /// Radii handed on to implied doubling; their `a = r²/(16 N log NΘ_ρ)`
    /// join the grid.
    pub radii: Vec<f64>,
}

impl Default for FrequencyBoundOptions {
    fn default() -> Self {
        Self { rho: 1.0, a_levels: 10, radii: dyadic(4) }
    }
}

/// `2a∫|∇f(x,0)|²e + (n/2)∫f²(x,0)e ≤ N log(NΘ_ρ) ∫f²(x,0)e` for `f = uψ`,
/// `e = e^{-|x|²/4a}`, on the hypothesis grid of each candidate `N`; the
/// least self-consistent `N` is the one implied doubling consumes.
pub fn frequency_bound_at_zero(
    u: Arc<dyn SpaceTimeField>,
    opts: &FrequencyBoundOptions,
    rule: &QuadratureRule,
) -> Result<CertificateReport> {
    let op = "frequency_bound_at_zero";
    if !(opts.rho > 0.0 && opts.rho <= 1.0) {
        return Err(ErrorKind::Precondition(format!("ρ = {} outside (0, 1]", opts.rho)).at("certifiers", op));
    }
    let base = theta_ratio(&*u, opts.rho, op)?;
    let theta = base.theta;
    let f = CutoffField::psi(u.clone());
    let (radii, _) = resolved(&*u, &opts.radii);
    let grid_for = |n: f64| -> (Vec<f64>, Vec<f64>) {
        let l = log_scale(n, theta);
        let roots: Vec<f64> = hypothesis_grid(l, opts.a_levels, &radii).iter().map(|a| a.sqrt()).collect();
        let (kept, dropped) = resolved(&*u, &roots);
        (kept.iter().map(|s| s * s).collect(), dropped.iter().map(|s| s * s).collect())
    };
    let budget = relative_budget(&*u);
    let holds = |n: f64| -> Result<bool> {
        let l = log_scale(n, theta);
        if l < 1.0 {
            return Ok(false);
        }
        let (grid, _) = grid_for(n);
        if grid.is_empty() {
            return Ok(false);
        }
        for a in grid {
            if gaussian_moments(&f, 0.0, a, rule)?[0] > l * (1.0 + budget) {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let search = self_consistent_constant(&holds, op)?;
    let n = search.constant;
    let l = log_scale(n, theta);
    let (grid, dropped) = grid_for(n);
    let mut report = CertificateReport::new(op, Provenance::of(&*u));
    for a in grid {
        report.push(&[("a", a)], gaussian_moments(&f, 0.0, a, rule)?[0], l);
    }
    report.detail("rho", opts.rho);
    report.detail("theta", base);
    report.detail("log_scale", l);
    report.detail("search", search);
    report.detail("dropped_a", dropped);
    report.detail("handoff", serde_json::json!({ "n": n, "theta": theta, "radii": radii }));
    report.finish(Some(n), budget * l, search.fails_below);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::find;

    #[test]
    fn constant_decay() {
        let u = find("const1").unwrap();
        let r = decay_lemma_check(&*u, &DecayOptions::default()).unwrap();
        // ∫_{B_1}/∫_{B_2} = 1/2, so N = 1 already holds
        assert_eq!(r.constant, Some(1.0));
        assert!(r.pass);
    }

    #[test]
    fn frequency_bound_constant_and_linear() {
        let rule = QuadratureRule::default();
        let one: Arc<dyn SpaceTimeField> = find("const1_n2").unwrap();
        let r = frequency_bound_at_zero(one, &FrequencyBoundOptions::default(), &rule).unwrap();
        assert!(r.lhs.iter().all(|q| (q - 1.0).abs() < 1e-9), "{:?}", r.lhs);
        let x1: Arc<dyn SpaceTimeField> = find("x1_n2").unwrap();
        let r = frequency_bound_at_zero(x1, &FrequencyBoundOptions::default(), &rule).unwrap();
        assert!(r.lhs.iter().all(|q| (q - 2.0).abs() < 1e-9), "{:?}", r.lhs);
        assert!(r.pass);
    }
}
