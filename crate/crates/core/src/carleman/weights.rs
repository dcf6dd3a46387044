use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::gk::integrate;
use crate::error::{ErrorKind, Result};
use crate::io::fmt_f64;

/// `θ` vanishes at and is undefined beyond this point.
pub const THETA_END: f64 = 5.0;
/// `β` is defined by its integral formula on `(0, BETA_END]`.
pub const BETA_END: f64 = 4.0;

/// `θ(t) = t^{1/2} (ln(5/t))^{3/2}` on `(0, 5]`.
pub fn theta(t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= THETA_END) {
        return Err(ErrorKind::Domain(format!("θ is defined on (0, 5], got {t}")).at("carleman", "theta"));
    }
    Ok(t.sqrt() * (THETA_END / t).ln().powf(1.5))
}

/// `I(s) = ∫_0^s θ(u)/u du`, by adaptive quadrature after `u = w²`.
pub fn theta_integral(s: f64, tol: f64) -> Result<f64> {
    if !(s > 0.0 && s <= THETA_END) {
        return Err(ErrorKind::Domain(format!("I(s) needs 0 < s ≤ 5, got {s}")).at("carleman", "theta_integral"));
    }
    // θ(w²)/w² · 2w = 2 (ln(5/w²))^{3/2}
    let f = |w: f64| 2.0 * (THETA_END / (w * w)).ln().max(0.0).powf(1.5);
    Ok(integrate(&f, 0.0, s.sqrt(), tol)?.0)
}

/// Cumulative values of `I` at geometrically spaced nodes `w_k = √5 · 2^{-k}`,
/// so a single evaluation only integrates over one short panel.
#[derive(Debug)]
struct InnerTable {
    /// ascending
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
    tol: f64,
}

const INNER_LEVELS: i32 = 64;

fn inner_integrand(w: f64) -> f64 {
    2.0 * (THETA_END / (w * w)).ln().max(0.0).powf(1.5)
}

impl InnerTable {
    fn new(tol: f64) -> Result<Self> {
        let nodes: Vec<f64> = (0..=INNER_LEVELS).rev().map(|k| THETA_END.sqrt() * 0.5f64.powi(k)).collect();
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = integrate(&inner_integrand, 0.0, nodes[0], tol)?.0;
        cumulative.push(acc);
        for pair in nodes.windows(2) {
            acc += integrate(&inner_integrand, pair[0], pair[1], tol)?.0;
            cumulative.push(acc);
        }
        Ok(Self { nodes, cumulative, tol })
    }

    /// `I(w²)`.
    fn eval(&self, w: f64) -> Result<f64> {
        let k = self.nodes.partition_point(|&x| x <= w);
        if k == 0 {
            return Ok(integrate(&inner_integrand, 0.0, w, self.tol)?.0);
        }
        let a = self.nodes[k - 1];
        Ok(self.cumulative[k - 1] + integrate(&inner_integrand, a, w, self.tol)?.0)
    }
}

/// Adaptive evaluation of `β(t) = t exp(-∫_0^t (1 - e^{-I(s)}) ds/s)`.
#[derive(Debug, Clone)]
pub struct Beta {
    tol: f64,
    inner: Arc<InnerTable>,
}

impl PartialEq for Beta {
    fn eq(&self, other: &Self) -> bool {
        self.tol == other.tol
    }
}

impl Beta {
    /// `tol` bounds the absolute error of `β` and its relative error.
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(ErrorKind::Precondition("tolerance must be positive".into()).at("carleman", "beta"));
        }
        // the inner error enters B multiplied by at most ∫ 2/w over the panels
        let inner = InnerTable::new(1e-4 * tol)?;
        Ok(Self { tol, inner: Arc::new(inner) })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t > 0.0 && t <= BETA_END) {
            return Err(ErrorKind::Domain(format!("β is defined on (0, 4], got {t}")).at("carleman", "beta"));
        }
        Ok(())
    }

    /// `B(t) = ∫_0^t (1 - e^{-I(s)}) ds/s`, with `s = w²`.
    pub fn outer_integral(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let err = std::cell::Cell::new(None);
        let f = |w: f64| -> f64 {
            match self.inner.eval(w) {
                Ok(i) => 2.0 * (-(-i).exp_m1()) / w,
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            }
        };
        let (v, _) = integrate(&f, 0.0, t.sqrt(), self.tol / t.max(1.0))?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        Ok(v)
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(t * (-self.outer_integral(t)?).exp())
    }

    /// `β'(t) = β(t) e^{-I(t)} / t`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        Ok(self.value_and_derivative(t)?.1)
    }

    pub fn value_and_derivative(&self, t: f64) -> Result<(f64, f64)> {
        let b = self.value(t)?;
        Ok((b, b * (-self.inner.eval(t.sqrt())?).exp() / t))
    }

    /// `β` continued past `t = 4` by its tangent line, which keeps it `C¹`
    /// and nondecreasing.
    pub fn extended(&self, t: f64) -> Result<f64> {
        if t <= BETA_END {
            return self.value(t);
        }
        let (b, d) = self.value_and_derivative(BETA_END)?;
        Ok(b + d * (t - BETA_END))
    }
}

/// `σ(t) = β(γt)/γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sigma {
    gamma: f64,
    beta: Beta,
}

impl Sigma {
    pub fn new(gamma: f64, tol: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(ErrorKind::Precondition(format!("γ = {gamma} must be positive")).at("carleman", "sigma"));
        }
        Ok(Self { gamma, beta: Beta::new(tol)? })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Right end `4/γ` of the range where the integral formula applies.
    pub fn end(&self) -> f64 {
        BETA_END / self.gamma
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.beta.value(self.gamma * t)? / self.gamma)
    }

    /// `σ̇(t) = β'(γt)`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.beta.derivative(self.gamma * t)
    }

    /// `σ` with the tangent-line continuation past `4/γ`.
    pub fn extended(&self, t: f64) -> Result<f64> {
        Ok(self.beta.extended(self.gamma * t)? / self.gamma)
    }
}

/// Samples of `σ`, `σ̇` and `θ(γt)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanWeightTable {
    pub gamma: f64,
    pub tol: f64,
    pub t: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigmadot: Vec<f64>,
    pub theta: Vec<f64>,
    /// `max t/σ(t)` over the samples.
    pub n_sigma: f64,
    pub below_identity: bool,
    pub nondecreasing: bool,
}

/// Tabulates `σ` on `points` equispaced samples of `(0, 4/γ]`.
pub fn sigma_table(gamma: f64, points: usize, tol: f64) -> Result<CarlemanWeightTable> {
    let sigma = Sigma::new(gamma, tol)?;
    let end = sigma.end();
    let t: Vec<f64> = (1..=points).map(|i| end * i as f64 / points as f64).collect();
    let rows: Vec<Result<(f64, f64, f64)>> = t
        .par_iter()
        .map(|&ti| {
            let (b, d) = sigma.beta.value_and_derivative(gamma * ti)?;
            Ok((b / gamma, d, theta(gamma * ti)?))
        })
        .collect();
    let mut table = CarlemanWeightTable {
        gamma,
        tol,
        t: t.clone(),
        sigma: Vec::with_capacity(points),
        sigmadot: Vec::with_capacity(points),
        theta: Vec::with_capacity(points),
        n_sigma: 0.0,
        below_identity: true,
        nondecreasing: true,
    };
    for (i, row) in rows.into_iter().enumerate() {
        let (s, sd, th) = row?;
        table.below_identity &= s > 0.0 && s <= t[i];
        if let Some(&prev) = table.sigma.last() {
            table.nondecreasing &= s >= prev;
        }
        table.n_sigma = table.n_sigma.max(t[i] / s);
        table.sigma.push(s);
        table.sigmadot.push(sd);
        table.theta.push(th);
    }
    Ok(table)
}

/// Writes a weight table as CSV with columns `t,sigma,sigmadot,theta`.
pub fn write_table_csv<W: Write>(table: &CarlemanWeightTable, out: W) -> Result<()> {
    let io_err = |e: csv::Error| ErrorKind::Io(e.to_string()).at("carleman", "write_table_csv");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "sigma", "sigmadot", "theta"]).map_err(io_err)?;
    for i in 0..table.t.len() {
        let row = [table.t[i], table.sigma[i], table.sigmadot[i], table.theta[i]];
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(io_err)?;
    }
    w.flush().map_err(|e| ErrorKind::Io(e.to_string()).at("carleman", "write_table_csv"))?;
    Ok(())
}

/// One sample of the `σ` equation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeSample {
    pub t: f64,
    pub sigmadot_difference: f64,
    pub sigmadot_exact: f64,
    /// Difference quotient of `ln(σ/(tσ̇))`.
    pub lhs: f64,
    /// `θ(γt)/t`.
    pub rhs: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeReport {
    pub gamma: f64,
    pub samples: Vec<OdeSample>,
    pub max_relative_residual: f64,
    /// Samples below `1e-6/γ` are skipped.
    pub excluded_below: f64,
    pub log_ratio_increasing: bool,
    pub pass: bool,
}

/// Pass threshold of the `σ` equation check.
pub const ODE_TOLERANCE: f64 = 1e-3;

/// Centered difference with one Richardson step.
fn richardson(f: &(dyn Fn(f64) -> Result<f64> + Sync), t: f64, step: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(t + h)? - f(t - h)?) / (2.0 * h)) };
    let (coarse, fine) = (d(step)?, d(0.5 * step)?);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Checks `d/dt ln(σ/(tσ̇)) = θ(γt)/t` on `points` geometrically spaced
/// samples of `[1e-6/γ, 3.5/γ]`, differentiating `σ` numerically.
pub fn check_sigma_ode(gamma: f64, points: usize, tol: f64) -> Result<OdeReport> {
    let sigma = Sigma::new(gamma, tol)?;
    let lo = 1e-6 / gamma;
    let hi = 3.5 / gamma;
    let ts: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points.max(2) - 1) as f64))
        .collect();
    let rel = 1e-2;
    let samples: Vec<Result<OdeSample>> = ts
        .par_iter()
        .map(|&t| {
            let s = |u: f64| sigma.value(u);
            let sdot = |u: f64| richardson(&s, u, rel * u);
            let log_ratio = |u: f64| -> Result<f64> { Ok((sigma.value(u)? / (u * sdot(u)?)).ln()) };
            let lhs = richardson(&log_ratio, t, 4.0 * rel * t)?;
            let rhs = theta(gamma * t)? / t;
            Ok(OdeSample {
                t,
                sigmadot_difference: sdot(t)?,
                sigmadot_exact: sigma.derivative(t)?,
                lhs,
                rhs,
                relative_residual: (lhs - rhs).abs() / rhs,
            })
        })
        .collect();
    let samples: Vec<OdeSample> = samples.into_iter().collect::<Result<_>>()?;
    let max = samples.iter().map(|s| s.relative_residual).fold(0.0, f64::max);
    let increasing = samples.iter().all(|s| s.lhs > 0.0);
    Ok(OdeReport {
        gamma,
        samples,
        max_relative_residual: max,
        excluded_below: lo,
        log_ratio_increasing: increasing,
        pass: max <= ODE_TOLERANCE && increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::{gamma, gamma_ur};

    /// `I(s) = √5 · 2^{5/2} Γ(5/2, ln(5/s)/2)` after `v = ln(5/u)`.
    fn theta_integral_exact(s: f64) -> f64 {
        5f64.sqrt() * 2f64.powf(2.5) * gamma(2.5) * gamma_ur(2.5, 0.5 * (5.0 / s).ln())
    }

    #[test]
    fn theta_values() {
        assert_eq!(theta(5.0).unwrap(), 0.0);
        assert!((theta(1.0).unwrap() - 5f64.ln().powf(1.5)).abs() < 1e-15);
        assert!((theta(1.0).unwrap() - 2.041_79).abs() < 1e-5);
        assert!(theta(1e-12).unwrap() < 1e-3);
        assert!(theta(0.0).is_err() && theta(5.1).is_err());
    }

    #[test]
    fn inner_integral_matches_incomplete_gamma() {
        for &s in &[1e-8, 1e-3, 0.5, 2.0, 4.0] {
            let q = theta_integral(s, 1e-14).unwrap();
            let e = theta_integral_exact(s);
            assert!((q - e).abs() < 1e-11 * e.max(1.0), "s={s}: {q} vs {e}");
        }
    }

    #[test]
    fn beta_limits_and_bounds() {
        let b = Beta::new(1e-12).unwrap();
        let r = b.value(1e-12).unwrap() / 1e-12;
        assert!((r - 1.0).abs() < 1e-3, "{r}");
        let mut prev = 0.0;
        for i in 1..=32 {
            let t = 4.0 * i as f64 / 32.0;
            let v = b.value(t).unwrap();
            assert!(v > prev && v <= t);
            prev = v;
        }
        assert!(b.value(4.5).is_err());
        assert!(b.extended(4.5).unwrap() > b.value(4.0).unwrap());
    }

    #[test]
    fn beta_converges_under_refinement() {
        for &t in &[0.01, 1.0, 4.0] {
            let coarse = Beta::new(1e-8).unwrap().value(t).unwrap();
            let fine = Beta::new(1e-9).unwrap().value(t).unwrap();
            assert!((coarse - fine).abs() <= 1e-8);
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let b = Beta::new(1e-13).unwrap();
        let t = 0.7;
        let h = 1e-4;
        let fd = (b.value(t + h).unwrap() - b.value(t - h).unwrap()) / (2.0 * h);
        assert!((fd - b.derivative(t).unwrap()).abs() < 1e-7);
    }
}
