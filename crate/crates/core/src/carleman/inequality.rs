use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::weights::Sigma;
use crate::error::{ErrorKind, Result};
use crate::frequency::cutoff::CutoffProfile;
use crate::numerics::coefficients::CoefficientModel;
use crate::numerics::field::{Jet, SpaceTimeField};
use crate::numerics::grid::MAX_DIM;
use crate::numerics::quadrature::{composite_gauss_legendre, gauss_legendre};

/// Default `δ`; the admissible range has no numeric upper end.
pub const DEFAULT_DELTA: f64 = 0.5;
/// Largest `N` the bisection will consider.
pub const N_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
    pub a: f64,
}

impl CarlemanParams {
    /// `γ = α/δ²`. Accepts `0 < a ≤ 1/α`; past `4/γ` the weight uses the
    /// tangent-line continuation of `σ`.
    pub fn new(alpha: f64, delta: f64, a: f64) -> Result<Self> {
        let fail = |m: String| Err(ErrorKind::Precondition(m).at("carleman", "params"));
        if !(alpha >= 2.0 && alpha.is_finite()) {
            return fail(format!("α = {alpha} must be at least 2"));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return fail(format!("δ = {delta} must lie in (0, 1]"));
        }
        if !(a > 0.0 && a <= 1.0 / alpha) {
            return fail(format!("a = {a} must lie in (0, 1/α]"));
        }
        Ok(Self { alpha, delta, gamma: alpha / (delta * delta), a })
    }

    /// The pinned choice `δ = 1/2`, `a = 1/(2α)`.
    pub fn pinned(alpha: f64) -> Result<Self> {
        Self::new(alpha, DEFAULT_DELTA, 0.5 / alpha)
    }

    /// Time window `3/γ` on which solutions are localized.
    pub fn support_window(&self) -> f64 {
        3.0 / self.gamma
    }

    pub fn sigma(&self, tol: f64) -> Result<Sigma> {
        Sigma::new(self.gamma, tol)
    }
}

/// `φ(|x|) χ(t)` with `φ` the unit-ball bump and
/// `χ(t) = exp(1 - 1/(1 - z²))`, `z = 2t/T - 1`, supported in `(0, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpField {
    dim: usize,
    duration: f64,
}

impl BumpField {
    pub fn new(dim: usize, duration: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM || !(duration > 0.0) {
            return Err(ErrorKind::Precondition(format!("bump needs 1 ≤ n ≤ 3 and T > 0, got n = {dim}, T = {duration}"))
                .at("carleman", "bump"));
        }
        Ok(Self { dim, duration })
    }

    /// The pinned bump with `T = 3/(2α)`.
    pub fn pinned(dim: usize, alpha: f64) -> Result<Self> {
        Self::new(dim, 1.5 / alpha)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    fn time_profile(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 || t >= self.duration {
            return (0.0, 0.0);
        }
        let z = 2.0 * t / self.duration - 1.0;
        let q = 1.0 - z * z;
        let chi = (1.0 - 1.0 / q).exp();
        (chi, chi * (-2.0 * z / (q * q)) * 2.0 / self.duration)
    }
}

const UNIT_BALL: CutoffProfile = CutoffProfile { inner: 0.0, outer: 1.0 };

impl SpaceTimeField for BumpField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        let (chi, chi_t) = self.time_profile(t);
        let r = x[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        if chi == 0.0 || r >= 1.0 {
            return Jet::ZERO;
        }
        let (phi, phi_r, phi_rr) = UNIT_BALL.radial(r);
        // φ_r/r → φ_rr(0) = -2 at the center
        let over_r = if r < 1e-8 { -2.0 } else { phi_r / r };
        let mut gradient = [0.0; MAX_DIM];
        for (g, xi) in gradient.iter_mut().zip(x).take(self.dim) {
            *g = over_r * xi * chi;
        }
        let lap = if r < 1e-8 { self.dim as f64 * -2.0 } else { phi_rr + (self.dim as f64 - 1.0) * over_r };
        Jet { value: phi * chi, gradient, laplacian: lap * chi, time_derivative: phi * chi_t }
    }

    fn support_half_width(&self) -> Option<f64> {
        Some(1.0)
    }

    fn time_domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn feature_scale(&self) -> f64 {
        0.125
    }

    fn label(&self) -> String {
        format!("bump(n={}, T={})", self.dim, self.duration)
    }
}

/// Composite Gauss-Legendre resolution for the inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InequalityQuadrature {
    pub space_panels: usize,
    pub time_panels: usize,
    pub order: usize,
    pub sigma_tol: f64,
}

impl Default for InequalityQuadrature {
    fn default() -> Self {
        Self { space_panels: 16, time_panels: 16, order: 8, sigma_tol: 1e-12 }
    }
}

impl InequalityQuadrature {
    pub fn refined(&self) -> Self {
        Self { space_panels: 2 * self.space_panels, time_panels: 2 * self.time_panels, ..*self }
    }
}

/// A nonnegative term held as its logarithm (`-∞` for zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogTerm {
    pub log: f64,
    pub value: f64,
}

impl LogTerm {
    fn new(log: f64) -> Self {
        Self { log, value: log.exp() }
    }
}

/// The five integrals of the inequality; `trace_*` are the two
/// `t = 0` terms before their `N`-dependent factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlemanTerms {
    /// `α² ∫∫ σ_a^{-α} v² G_a`
    pub weighted_mass: LogTerm,
    /// `α ∫∫ σ_a^{1-α} |∇v|² G_a`
    pub weighted_gradient: LogTerm,
    /// `∫∫ σ_a^{1-α} |Pv|² G_a`
    pub operator: LogTerm,
    /// `α^α sup_t ∫ v² + |∇v|²`
    pub energy: LogTerm,
    /// `σ(a)^{-α} ∫ |∇v(x,0)|² G_a(x,0)`
    pub trace_gradient: LogTerm,
    /// `σ(a)^{-α} α ∫ v²(x,0) G_a(x,0)`
    pub trace_mass: LogTerm,
}

impl CarlemanTerms {
    /// `RHS(N) - LHS` divided by `e^{scale}` to stay finite.
    pub fn margin(&self, n: f64, alpha: f64, a: f64) -> f64 {
        let scale = self.scale();
        let e = |l: f64| (l - scale).exp();
        let lhs = e(self.weighted_mass.log) + e(self.weighted_gradient.log);
        let rhs = n * e(self.operator.log) + (alpha * n.ln() + self.energy.log - scale).exp() + n * e(self.trace_mass.log)
            - (a / n) * e(self.trace_gradient.log);
        rhs - lhs
    }

    fn scale(&self) -> f64 {
        [
            self.weighted_mass.log,
            self.weighted_gradient.log,
            self.operator.log,
            self.energy.log,
            self.trace_gradient.log,
            self.trace_mass.log,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanInequalityReport {
    pub params: CarlemanParams,
    pub quadrature: InequalityQuadrature,
    pub terms: CarlemanTerms,
    /// Smallest `N ≥ 1` (to bisection accuracy) for which the inequality holds.
    pub n_star: f64,
    /// The inequality fails at `N*/1.05`, or `N* = 1`.
    pub minimal: bool,
    /// Relative gap between the supremum over time nodes and over the nodes
    /// of the refined rule.
    pub sup_time_error: f64,
}

/// Streaming `log Σ exp(x_i)`.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, log: f64) {
        if log == f64::NEG_INFINITY {
            return;
        }
        if log > self.max {
            self.sum = self.sum * (self.max - log).exp() + 1.0;
            self.max = log;
        } else {
            self.sum += (log - self.max).exp();
        }
    }

    fn merge(mut self, other: LogSum) -> LogSum {
        if other.max > f64::NEG_INFINITY {
            self.sum = if self.max == f64::NEG_INFINITY {
                other.sum
            } else if other.max > self.max {
                self.sum * (self.max - other.max).exp() + other.sum
            } else {
                self.sum + other.sum * (other.max - self.max).exp()
            };
            self.max = self.max.max(other.max);
        }
        self
    }

    fn log(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

fn ln_or_neg_inf(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Tensor-product spatial nodes on `[-R, R]^n`.
fn space_nodes(dim: usize, radius: f64, q: &InequalityQuadrature) -> Vec<([f64; MAX_DIM], f64)> {
    let base = gauss_legendre(q.order);
    let breaks: Vec<f64> = (1..q.space_panels).map(|i| -radius + 2.0 * radius * i as f64 / q.space_panels as f64).collect();
    let axis = composite_gauss_legendre(-radius, radius, &breaks, &base);
    let mut out = vec![([0.0; MAX_DIM], 1.0)];
    for d in 0..dim {
        out = out
            .into_iter()
            .flat_map(|(p, w)| {
                axis.iter().map(move |&(x, wx)| {
                    let mut p = p;
                    p[d] = x;
                    (p, w * wx)
                })
            })
            .collect();
    }
    out
}

/// `P v = div(g ∇v) + ∂_t v`; the divergence is a centered difference of
/// `g ∇v` when `g` is not the identity.
fn operator(v: &dyn SpaceTimeField, model: &CoefficientModel, x: &[f64], t: f64, jet: &Jet) -> f64 {
    let n = v.dim();
    if matches!(model, CoefficientModel::Identity) {
        return jet.backward_heat();
    }
    const ETA: f64 = 1e-5;
    let flux = |y: &[f64], i: usize| -> f64 {
        let g = model.eval(n, y, t);
        let j = v.jet(y, t);
        (0..n).map(|k| g[i][k] * j.gradient[k]).sum()
    };
    let mut div = 0.0;
    let mut y = [0.0; MAX_DIM];
    for i in 0..n {
        y[..n].copy_from_slice(&x[..n]);
        y[i] = x[i] + ETA;
        let plus = flux(&y[..n], i);
        y[i] = x[i] - ETA;
        let minus = flux(&y[..n], i);
        div += (plus - minus) / (2.0 * ETA);
    }
    div + jet.time_derivative
}

/// Evaluates the five terms of the weighted inequality for `v` supported in
/// `[-R, R]^n × [0, t_end)` and finds the least admissible `N`.
pub fn carleman_inequality_eval(
    v: &dyn SpaceTimeField,
    model: &CoefficientModel,
    params: &CarlemanParams,
    t_end: f64,
    quad: &InequalityQuadrature,
) -> Result<CarlemanInequalityReport> {
    let op = "inequality";
    let n = v.dim();
    let origin = [0.0; MAX_DIM];
    let g0 = model.eval(n, &origin[..n], 0.0);
    for (i, row) in g0.iter().enumerate().take(n) {
        for (j, &gij) in row.iter().enumerate().take(n) {
            if (gij - if i == j { 1.0 } else { 0.0 }).abs() > 1e-12 {
                return Err(ErrorKind::Coefficients(format!("g(0,0) differs from the identity at ({i},{j})")).at("carleman", op));
            }
        }
    }
    let alpha = params.alpha;
    if !(t_end > 0.0 && t_end <= 3.0 / alpha) {
        return Err(ErrorKind::Support(format!("time support {t_end} must lie in (0, 3/α]")).at("carleman", op));
    }
    let radius = v.support_half_width().ok_or_else(|| {
        ErrorKind::Support("the field reports no compact spatial support".into()).at("carleman", op)
    })?;
    let nodes = space_nodes(n, radius, quad);
    // v must vanish at the end of its time support and on the box faces
    let vanishes_after = nodes.iter().all(|(p, _)| v.value(&p[..n], t_end) == 0.0 && v.value(&p[..n], 1.01 * t_end) == 0.0);
    if !vanishes_after {
        return Err(ErrorKind::Support(format!("v does not vanish at t = {t_end}")).at("carleman", op));
    }

    let sigma = params.sigma(quad.sigma_tol)?;
    let a = params.a;
    let base = gauss_legendre(quad.order);
    let breaks: Vec<f64> = (1..quad.time_panels).map(|i| t_end * i as f64 / quad.time_panels as f64).collect();
    let times = composite_gauss_legendre(0.0, t_end, &breaks, &base);

    struct Slice {
        mass: LogSum,
        gradient: LogSum,
        operator: LogSum,
        energy: f64,
    }
    let slice = |t: f64, wt: f64| -> Result<Slice> {
        let ln_sigma = sigma.extended(t + a)?.ln();
        let s = t + a;
        let ln_wt = wt.ln();
        let (mut mass, mut gradient, mut oper) = (LogSum::new(), LogSum::new(), LogSum::new());
        let mut energy = 0.0;
        for (p, w) in &nodes {
            let x = &p[..n];
            let jet = v.jet(x, t);
            let r2: f64 = x.iter().map(|c| c * c).sum();
            let ln_g = -0.5 * n as f64 * s.ln() - r2 / (4.0 * s);
            let base = ln_wt + w.ln() + ln_g;
            let g2 = jet.grad_norm_sq();
            mass.add(base - alpha * ln_sigma + ln_or_neg_inf(jet.value * jet.value));
            gradient.add(base + (1.0 - alpha) * ln_sigma + ln_or_neg_inf(g2));
            let pv = operator(v, model, x, t, &jet);
            oper.add(base + (1.0 - alpha) * ln_sigma + ln_or_neg_inf(pv * pv));
            energy += w * (jet.value * jet.value + g2);
        }
        Ok(Slice { mass, gradient, operator: oper, energy })
    };
    let slices: Vec<Result<Slice>> = times.par_iter().map(|&(t, wt)| slice(t, wt)).collect();
    let (mut mass, mut gradient, mut oper) = (LogSum::new(), LogSum::new(), LogSum::new());
    let mut sup = 0.0f64;
    for s in slices {
        let s = s?;
        mass = mass.merge(s.mass);
        gradient = gradient.merge(s.gradient);
        oper = oper.merge(s.operator);
        sup = sup.max(s.energy);
    }
    let initial = slice(0.0, 1.0)?;
    sup = sup.max(initial.energy);
    // the refined rule's time nodes bound how much the supremum can still move
    let fine_breaks: Vec<f64> = (1..2 * quad.time_panels).map(|i| t_end * i as f64 / (2 * quad.time_panels) as f64).collect();
    let fine_sup = composite_gauss_legendre(0.0, t_end, &fine_breaks, &base)
        .par_iter()
        .map(|&(t, _)| nodes.iter().map(|(p, w)| {
            let j = v.jet(&p[..n], t);
            w * (j.value * j.value + j.grad_norm_sq())
        }).sum::<f64>())
        .reduce(|| 0.0, f64::max)
        .max(sup);
    let sup_time_error = if fine_sup > 0.0 { (fine_sup - sup) / fine_sup } else { 0.0 };

    let ln_sigma_a = sigma.extended(a)?.ln();
    let ln_alpha = alpha.ln();
    // at t = 0 `initial` already carries σ(a)^{1-α} and σ(a)^{-α}; rebalance to σ(a)^{-α}
    let terms = CarlemanTerms {
        weighted_mass: LogTerm::new(2.0 * ln_alpha + mass.log()),
        weighted_gradient: LogTerm::new(ln_alpha + gradient.log()),
        operator: LogTerm::new(oper.log()),
        energy: LogTerm::new(alpha * ln_alpha + ln_or_neg_inf(sup)),
        trace_gradient: LogTerm::new(initial.gradient.log() - ln_sigma_a),
        trace_mass: LogTerm::new(ln_alpha + initial.mass.log()),
    };
    let n_star = minimal_constant(&terms, alpha, a)?;
    let minimal = n_star <= 1.05 || terms.margin(n_star / 1.05, alpha, a) < 0.0;
    Ok(CarlemanInequalityReport { params: *params, quadrature: *quad, terms, n_star, minimal, sup_time_error })
}

/// Log-bisection for the least `N ∈ [1, N_CAP]` with nonnegative margin.
fn minimal_constant(terms: &CarlemanTerms, alpha: f64, a: f64) -> Result<f64> {
    if terms.margin(1.0, alpha, a) >= 0.0 {
        return Ok(1.0);
    }
    if terms.margin(N_CAP, alpha, a) < 0.0 {
        return Err(ErrorKind::NoAdmissibleConstant { cap: N_CAP }.at("carleman", "inequality"));
    }
    let (mut lo, mut hi) = (0.0f64, N_CAP.ln());
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if terms.margin(mid.exp(), alpha, a) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

/// Location and size of the largest `σ_a^{1-α} G_a` on the shell region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightBoundReport {
    pub params: CarlemanParams,
    pub dim: usize,
    pub log_max: f64,
    pub argmax_radius: f64,
    pub argmax_time: f64,
    /// Least `N ≥ 1` with `N^{α+n/2} α^{α+n/2-1} ≥ max`.
    pub n_min: f64,
    pub radial_step: f64,
    pub time_step: f64,
}

/// Grid search of `σ_a^{1-α} G_a` over
/// `{|x| ≤ 4, 0 ≤ t ≤ 2/α} \ {|x| ≤ 3, 0 ≤ t ≤ 1/α}`.
pub fn check_sigma_weight_bound(
    params: &CarlemanParams,
    dim: usize,
    radial_step: f64,
    time_step: f64,
    sigma_tol: f64,
) -> Result<WeightBoundReport> {
    let alpha = params.alpha;
    if 1.0 / alpha < time_step {
        return Err(ErrorKind::Unresolved(format!("time step {time_step} does not resolve 1/α = {}", 1.0 / alpha))
            .at("carleman", "weight_bound"));
    }
    let sigma = params.sigma(sigma_tol)?;
    let nt = (2.0 / alpha / time_step).round() as usize;
    let nr = (4.0 / radial_step).round() as usize;
    let rows: Vec<Result<(f64, f64, f64)>> = (0..=nt)
        .into_par_iter()
        .map(|i| {
            let t = 2.0 / alpha * i as f64 / nt as f64;
            let s = t + params.a;
            let ln_sigma = sigma.extended(s)?.ln();
            let mut best = (f64::NEG_INFINITY, 0.0, t);
            for j in 0..=nr {
                let r = 4.0 * j as f64 / nr as f64;
                if r < 3.0 && t <= 1.0 / alpha {
                    continue;
                }
                let v = (1.0 - alpha) * ln_sigma - 0.5 * dim as f64 * s.ln() - r * r / (4.0 * s);
                if v > best.0 {
                    best = (v, r, t);
                }
            }
            Ok(best)
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for row in rows {
        let row = row?;
        if row.0 > best.0 {
            best = row;
        }
    }
    let p = alpha + 0.5 * dim as f64;
    let ln_n = (best.0 - (p - 1.0) * alpha.ln()) / p;
    Ok(WeightBoundReport {
        params: *params,
        dim,
        log_max: best.0,
        argmax_radius: best.1,
        argmax_time: best.2,
        n_min: ln_n.exp().max(1.0),
        radial_step,
        time_step,
    })
}

/// Convenience: the pinned bump for `α`, in dimension one.
pub fn pinned_bump(alpha: f64) -> Result<Arc<BumpField>> {
    Ok(Arc::new(BumpField::pinned(1, alpha)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jet(f: &BumpField, x: &[f64], t: f64) -> Jet {
        let h = 1e-4;
        let n = f.dim;
        let mut jet = Jet { value: f.value(x, t), ..Jet::ZERO };
        let mut y = x.to_vec();
        for i in 0..n {
            y[i] = x[i] + h;
            let p = f.value(&y, t);
            y[i] = x[i] - h;
            let m = f.value(&y, t);
            y[i] = x[i];
            jet.gradient[i] = (p - m) / (2.0 * h);
            jet.laplacian += (p - 2.0 * jet.value + m) / (h * h);
        }
        jet.time_derivative = (f.value(x, t + h) - f.value(x, t - h)) / (2.0 * h);
        jet
    }

    #[test]
    fn bump_jet_matches_differences() {
        for dim in 1..=3 {
            let b = BumpField::new(dim, 0.4).unwrap();
            let x = [0.3, -0.2, 0.1];
            let (exact, fd) = (b.jet(&x[..dim], 0.2), fd_jet(&b, &x[..dim], 0.2));
            assert!((exact.laplacian - fd.laplacian).abs() < 1e-5, "{dim}: {exact:?} {fd:?}");
            assert!((exact.time_derivative - fd.time_derivative).abs() < 1e-6);
            assert!((exact.gradient[0] - fd.gradient[0]).abs() < 1e-7);
        }
        let b = BumpField::new(2, 0.4).unwrap();
        let c = b.jet(&[0.0, 0.0], 0.1);
        let near = b.jet(&[1e-6, 0.0], 0.1);
        assert!((c.laplacian - near.laplacian).abs() < 1e-6);
    }

    #[test]
    fn params_validation() {
        let p = CarlemanParams::pinned(4.0).unwrap();
        assert_eq!(p.gamma, 16.0);
        assert_eq!(p.a, 0.125);
        assert!(CarlemanParams::new(1.0, 0.5, 0.1).is_err());
        assert!(CarlemanParams::new(4.0, 0.5, 0.3).is_err());
    }

    struct Zero;
    impl SpaceTimeField for Zero {
        fn dim(&self) -> usize {
            1
        }
        fn jet(&self, _: &[f64], _: f64) -> Jet {
            Jet::ZERO
        }
        fn support_half_width(&self) -> Option<f64> {
            Some(1.0)
        }
        fn label(&self) -> String {
            "0".into()
        }
    }

    #[test]
    fn zero_field_needs_n_one() {
        let p = CarlemanParams::pinned(4.0).unwrap();
        let q = InequalityQuadrature { space_panels: 2, time_panels: 2, ..Default::default() };
        let r = carleman_inequality_eval(&Zero, &CoefficientModel::Identity, &p, 0.375, &q).unwrap();
        assert_eq!(r.n_star, 1.0);
        assert_eq!(r.terms.weighted_mass.value, 0.0);
        assert_eq!(r.terms.trace_mass.value, 0.0);
    }

    struct Scaled(BumpField, f64);
    impl SpaceTimeField for Scaled {
        fn dim(&self) -> usize {
            1
        }
        fn jet(&self, x: &[f64], t: f64) -> Jet {
            self.0.jet(x, t).scaled(self.1)
        }
        fn support_half_width(&self) -> Option<f64> {
            Some(1.0)
        }
        fn label(&self) -> String {
            "scaled".into()
        }
    }

    #[test]
    fn terms_are_quadratic_in_v() {
        let p = CarlemanParams::pinned(4.0).unwrap();
        let q = InequalityQuadrature { space_panels: 8, time_panels: 8, ..Default::default() };
        let bump = BumpField::pinned(1, 4.0).unwrap();
        let t_end = bump.duration();
        let one = carleman_inequality_eval(&bump, &CoefficientModel::Identity, &p, t_end, &q).unwrap();
        let two = carleman_inequality_eval(&Scaled(bump, 2.0), &CoefficientModel::Identity, &p, t_end, &q).unwrap();
        let pairs = [
            (one.terms.weighted_mass, two.terms.weighted_mass),
            (one.terms.weighted_gradient, two.terms.weighted_gradient),
            (one.terms.operator, two.terms.operator),
            (one.terms.energy, two.terms.energy),
            (one.terms.trace_gradient, two.terms.trace_gradient),
            (one.terms.trace_mass, two.terms.trace_mass),
        ];
        for (a, b) in pairs {
            if a.value == 0.0 {
                assert_eq!(b.value, 0.0);
                continue;
            }
            assert!((b.log - a.log - 4f64.ln()).abs() < 1e-12);
        }
        assert!(one.n_star > 1.0 && one.minimal);
    }

    #[test]
    fn coefficients_must_be_identity_at_origin() {
        let p = CarlemanParams::pinned(4.0).unwrap();
        let bump = BumpField::pinned(1, 4.0).unwrap();
        let model = CoefficientModel::Perturbed { epsilon: 0.1, off_diagonal: 0.0, wavenumber: 1.0, frequency: 1.0 };
        let q = InequalityQuadrature { space_panels: 4, time_panels: 4, ..Default::default() };
        // sin(k Σx + ω t) vanishes at the origin, so this model is admissible
        let r = carleman_inequality_eval(&bump, &model, &p, bump.duration(), &q).unwrap();
        assert!(r.n_star.is_finite());
    }

    #[test]
    fn support_is_enforced() {
        let p = CarlemanParams::pinned(4.0).unwrap();
        let bump = BumpField::new(1, 0.7).unwrap();
        let q = InequalityQuadrature::default();
        let e = carleman_inequality_eval(&bump, &CoefficientModel::Identity, &p, 0.5, &q).unwrap_err();
        assert!(matches!(e.kind, ErrorKind::Support(_)));
    }

    #[test]
    fn weight_bound_sweep() {
        for alpha in [4.0, 8.0, 16.0] {
            let p = CarlemanParams::new(alpha, DEFAULT_DELTA, 1e-3).unwrap();
            let r = check_sigma_weight_bound(&p, 1, 0.01, 0.1 / alpha, 1e-10).unwrap();
            assert!(r.n_min.is_finite() && r.n_min >= 1.0);
        }
        let p = CarlemanParams::new(4.0, DEFAULT_DELTA, 1e-3).unwrap();
        let r = check_sigma_weight_bound(&p, 1, 0.01, 0.01, 1e-10).unwrap();
        // the maximizer sits on the boundary of the excluded cylinder
        let on_side = (r.argmax_radius - 3.0).abs() < 1e-12 && r.argmax_time <= 0.25;
        let on_top = r.argmax_radius < 3.0 && (r.argmax_time - 0.25).abs() <= 0.01 + 1e-12;
        assert!(on_side || on_top, "{r:?}");
        assert!(check_sigma_weight_bound(&p, 1, 0.01, 0.5, 1e-10).is_err());
    }
}
