//! Gaussian-weighted mass `H_a`, Dirichlet energy `D_a` and the frequency
//! `N_a = 2(t+a) D_a / H_a`, with checks of their time derivatives.

pub mod cutoff;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use cutoff::{CutoffField, CutoffProfile};

use crate::error::{ErrorKind, Result};
use crate::io::fmt_f64;
use crate::numerics::field::SpaceTimeField;
use crate::numerics::quadrature::{weighted_integrals, IntegrandKind, Quadrature, QuadratureRule};
use crate::numerics::weight::GaussianWeight;

/// `H_a` below this is treated as a vanishing field.
pub const H_FLOOR: f64 = 1e-300;

/// Smallest time step used for difference quotients in `t`.
pub const MIN_TIME_STEP: f64 = 1e-4;

/// `H_a`, `D_a` and `N_a` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencySample {
    pub t: f64,
    pub h: f64,
    pub d: f64,
    pub n: f64,
    /// Quadrature error bound on `N` propagated from those on `H` and `D`.
    pub n_error: f64,
}

/// Sampled `t ↦ (H_a, D_a, N_a)` with difference estimates of `Ḣ_a`, `Ṅ_a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTrace {
    pub center: Vec<f64>,
    pub offset: f64,
    pub step: f64,
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub d: Vec<f64>,
    pub n: Vec<f64>,
    pub h_dot: Vec<f64>,
    pub n_dot: Vec<f64>,
}

fn degenerate(op: &'static str, t: f64, h: f64) -> crate::error::Error {
    ErrorKind::Degenerate(format!("H_a({t}) = {h:e} is below {H_FLOOR:e}")).at("frequency", op)
}

fn check_time(field: &dyn SpaceTimeField, weight: &GaussianWeight, t: f64, op: &'static str) -> Result<()> {
    if weight.offset() <= 0.0 {
        return Err(ErrorKind::Precondition(format!("offset a = {} must be positive", weight.offset())).at("frequency", op));
    }
    if weight.scale(t) <= 0.0 {
        return Err(ErrorKind::Domain(format!("t + a = {} must be positive", weight.scale(t))).at("frequency", op));
    }
    let (lo, hi) = field.time_domain();
    if t < lo || t > hi {
        return Err(ErrorKind::Domain(format!("t = {t} outside the field's time domain [{lo}, {hi}]")).at("frequency", op));
    }
    Ok(())
}

/// `(H_a(t), D_a(t))` as quadratures.
pub fn energies(
    field: &dyn SpaceTimeField,
    weight: &GaussianWeight,
    t: f64,
    rule: &QuadratureRule,
) -> Result<(Quadrature, Quadrature)> {
    let q = weighted_integrals(field, t, weight, &[IntegrandKind::ValueSq, IntegrandKind::GradSq], rule)?;
    Ok((q[0], q[1]))
}

/// `N_a(t)` together with `H_a` and `D_a`.
pub fn frequency_at(
    field: &dyn SpaceTimeField,
    weight: &GaussianWeight,
    t: f64,
    rule: &QuadratureRule,
) -> Result<FrequencySample> {
    check_time(field, weight, t, "frequency")?;
    let (h, d) = energies(field, weight, t, rule)?;
    if h.value < H_FLOOR {
        return Err(degenerate("frequency", t, h.value));
    }
    let s = weight.scale(t);
    let n = 2.0 * s * d.value / h.value;
    let n_error = 2.0 * s * (d.error() / h.value + d.value.abs() * h.error() / (h.value * h.value));
    Ok(FrequencySample { t, h: h.value, d: d.value, n, n_error })
}

/// Step used for difference quotients in time: `max(1e-4, Δt)`.
pub fn time_step_for(field: &dyn SpaceTimeField) -> f64 {
    let dt = field.time_scale();
    if dt.is_finite() {
        dt.max(MIN_TIME_STEP)
    } else {
        MIN_TIME_STEP
    }
}

/// Second-order difference quotient of each component of `g` at `t`:
/// centered when both neighbors are admissible, one-sided three-point
/// otherwise.
pub(crate) fn derivative<const K: usize>(
    g: &(dyn Fn(f64) -> Result<[f64; K]> + Sync),
    t: f64,
    step: f64,
    admissible: &dyn Fn(f64) -> bool,
) -> Result<[f64; K]> {
    let combine = |w: [f64; 3], at: [f64; 3]| -> Result<[f64; K]> {
        let v = [g(t + at[0] * step)?, g(t + at[1] * step)?, g(t + at[2] * step)?];
        Ok(std::array::from_fn(|k| (w[0] * v[0][k] + w[1] * v[1][k] + w[2] * v[2][k]) / (2.0 * step)))
    };
    if admissible(t - step) && admissible(t + step) {
        let v = [g(t + step)?, g(t - step)?];
        Ok(std::array::from_fn(|k| (v[0][k] - v[1][k]) / (2.0 * step)))
    } else if admissible(t + 2.0 * step) {
        combine([-3.0, 4.0, -1.0], [0.0, 1.0, 2.0])
    } else if admissible(t - 2.0 * step) {
        combine([3.0, -4.0, 1.0], [0.0, -1.0, -2.0])
    } else {
        Err(ErrorKind::Domain(format!("no room for a difference quotient of step {step} at t = {t}"))
            .at("frequency", "derivative"))
    }
}

fn admissible_times<'a>(field: &'a dyn SpaceTimeField, weight: &'a GaussianWeight) -> impl Fn(f64) -> bool + 'a {
    let (lo, hi) = field.time_domain();
    move |t| t >= lo && t <= hi && weight.scale(t) > 0.0
}

/// Samples `H_a`, `D_a`, `N_a` at the given times, with `Ḣ_a` and `Ṅ_a`
/// from difference quotients of step `max(1e-4, Δt)`.
pub fn trace(
    field: &dyn SpaceTimeField,
    weight: &GaussianWeight,
    times: &[f64],
    rule: &QuadratureRule,
) -> Result<FrequencyTrace> {
    let step = time_step_for(field);
    let admissible = admissible_times(field, weight);
    let rows: Vec<Result<(FrequencySample, f64, f64)>> = times
        .par_iter()
        .map(|&t| {
            let sample = frequency_at(field, weight, t, rule)?;
            let h_and_n = |s: f64| -> Result<[f64; 2]> {
                let f = frequency_at(field, weight, s, rule)?;
                Ok([f.h, f.n])
            };
            let [h_dot, n_dot] = derivative(&h_and_n, t, step, &admissible)?;
            Ok((sample, h_dot, n_dot))
        })
        .collect();
    let mut out = FrequencyTrace {
        center: weight.center().to_vec(),
        offset: weight.offset(),
        step,
        t: Vec::with_capacity(times.len()),
        h: Vec::new(),
        d: Vec::new(),
        n: Vec::new(),
        h_dot: Vec::new(),
        n_dot: Vec::new(),
    };
    for row in rows {
        let (s, hd, nd) = row?;
        if ![s.h, s.d, s.n, hd, nd].iter().all(|v| v.is_finite()) {
            return Err(ErrorKind::NonFinite.at("frequency", "trace"));
        }
        out.t.push(s.t);
        out.h.push(s.h);
        out.d.push(s.d);
        out.n.push(s.n);
        out.h_dot.push(hd);
        out.n_dot.push(nd);
    }
    Ok(out)
}

/// Writes a trace as CSV with columns `t,H,D,N,Hdot,Ndot`.
pub fn write_trace_csv<W: Write>(trace: &FrequencyTrace, out: W) -> Result<()> {
    let io_err = |e: csv::Error| ErrorKind::Io(e.to_string()).at("frequency", "write_trace_csv");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "H", "D", "N", "Hdot", "Ndot"]).map_err(io_err)?;
    for i in 0..trace.t.len() {
        let row = [trace.t[i], trace.h[i], trace.d[i], trace.n[i], trace.h_dot[i], trace.n_dot[i]];
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(io_err)?;
    }
    w.flush().map_err(|e| ErrorKind::Io(e.to_string()).at("frequency", "write_trace_csv"))?;
    Ok(())
}

/// Both sides of a differentiation identity at one `(a, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub t: f64,
    pub offset: f64,
    pub step: f64,
    /// Difference quotient of the left-hand quantity.
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Residual over the largest magnitude among the terms.
    pub relative_residual: f64,
    /// Size of the terms entering the identity.
    pub scale: f64,
}

impl IdentityResidual {
    fn new(t: f64, offset: f64, step: f64, lhs: f64, rhs: f64, scale: f64) -> Self {
        let residual = (lhs - rhs).abs();
        let relative_residual = if scale > 0.0 { residual / scale } else { 0.0 };
        Self { t, offset, step, lhs, rhs, residual, relative_residual, scale }
    }
}

fn require_analytic(field: &dyn SpaceTimeField, op: &'static str) -> Result<()> {
    if field.is_analytic() {
        Ok(())
    } else {
        Err(ErrorKind::NonAnalytic.at("frequency", op))
    }
}

/// `Ḣ_a = 2∫f(Δf+∂_t f)G_a + 2D_a`, difference quotient against the integrals.
pub fn check_h_dot_identity(
    field: &dyn SpaceTimeField,
    weight: &GaussianWeight,
    t: f64,
    step: f64,
    rule: &QuadratureRule,
) -> Result<IdentityResidual> {
    let op = "check_h_dot_identity";
    require_analytic(field, op)?;
    check_time(field, weight, t, op)?;
    let h_of = |s: f64| -> Result<[f64; 1]> { Ok([energies(field, weight, s, rule)?.0.value]) };
    let [lhs] = derivative(&h_of, t, step, &admissible_times(field, weight))?;
    let q = weighted_integrals(
        field,
        t,
        weight,
        &[IntegrandKind::custom(|_, j| j.value * j.backward_heat()), IntegrandKind::GradSq, IntegrandKind::ValueSq],
        rule,
    )?;
    let rhs = 2.0 * q[0].value + 2.0 * q[1].value;
    // H/(t+a) is the natural rate for H and keeps the ratio meaningful when Ḣ = 0
    let scale = lhs.abs().max(2.0 * q[0].magnitude).max(2.0 * q[1].magnitude).max(q[2].value / weight.scale(t));
    Ok(IdentityResidual::new(t, weight.offset(), step, lhs, rhs, scale))
}

/// `Ḋ_a = 2∫(∂_t f + (x-y)·∇f/2s − ½(Δf+∂_t f))²G_a − ½∫(Δf+∂_t f)²G_a − D_a/s`.
pub fn check_d_dot_identity(
    field: &dyn SpaceTimeField,
    weight: &GaussianWeight,
    t: f64,
    step: f64,
    rule: &QuadratureRule,
) -> Result<IdentityResidual> {
    let op = "check_d_dot_identity";
    require_analytic(field, op)?;
    check_time(field, weight, t, op)?;
    let d_of = |s: f64| -> Result<[f64; 1]> { Ok([energies(field, weight, s, rule)?.1.value]) };
    let [lhs] = derivative(&d_of, t, step, &admissible_times(field, weight))?;
    let s = weight.scale(t);
    let center = weight.center().to_vec();
    let square = IntegrandKind::custom(move |x, j| {
        let radial: f64 = x.iter().zip(&center).zip(&j.gradient).map(|((xi, yi), g)| (xi - yi) * g).sum();
        let q = j.time_derivative + radial / (2.0 * s) - 0.5 * j.backward_heat();
        q * q
    });
    let q = weighted_integrals(field, t, weight, &[square, IntegrandKind::BackwardHeatSq, IntegrandKind::GradSq], rule)?;
    let rhs = 2.0 * q[0].value - 0.5 * q[1].value - q[2].value / s;
    let scale = lhs.abs().max(2.0 * q[0].magnitude).max(0.5 * q[1].magnitude).max(q[2].magnitude / s);
    Ok(IdentityResidual::new(t, weight.offset(), step, lhs, rhs, scale))
}

/// `Ṅ_a` against the lower bound `-(s/H_a)∫(Δf+∂_t f)²G_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeBound {
    pub t: f64,
    pub offset: f64,
    pub n: f64,
    pub n_dot: f64,
    pub bound: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn check_frequency_derivative_bound(
    field: &dyn SpaceTimeField,
    weight: &GaussianWeight,
    t: f64,
    tolerance: f64,
    rule: &QuadratureRule,
) -> Result<DerivativeBound> {
    let op = "check_frequency_derivative_bound";
    check_time(field, weight, t, op)?;
    let step = time_step_for(field);
    let q = weighted_integrals(field, t, weight, &[IntegrandKind::ValueSq, IntegrandKind::GradSq, IntegrandKind::BackwardHeatSq], rule)?;
    if q[0].value < H_FLOOR {
        return Err(degenerate(op, t, q[0].value));
    }
    let s = weight.scale(t);
    let n = 2.0 * s * q[1].value / q[0].value;
    let n_of = |u: f64| -> Result<[f64; 1]> { Ok([frequency_at(field, weight, u, rule)?.n]) };
    let [n_dot] = derivative(&n_of, t, step, &admissible_times(field, weight))?;
    let bound = -s / q[0].value * q[2].value;
    let slack = n_dot - bound;
    Ok(DerivativeBound { t, offset: weight.offset(), n, n_dot, bound, slack, tolerance, pass: slack >= -tolerance })
}

/// Outcome of the almost-monotonicity scan of `m(t) = e^{Nt}(N_a(t) + N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub offset: f64,
    pub theta: f64,
    pub tolerance: f64,
    pub times: Vec<f64>,
    pub frequency: Vec<f64>,
    /// Candidates tried, with the window end and the smallest forward
    /// difference of `m` on that window.
    pub candidates: Vec<MonotonicityCandidate>,
    pub minimal_n: Option<f64>,
    /// Set when the requested window had to be shortened to `t + a ≤ 1/(N log NΘ)`.
    pub window_clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityCandidate {
    pub n: f64,
    pub window_end: f64,
    pub samples: usize,
    pub min_difference: f64,
    pub pass: bool,
}

/// Evaluates `m(t) = e^{Nt}N_a(t) + Ne^{Nt}` over `[0, window]` clipped to
/// `t + a ≤ 1/(N log(NΘ))`, for `N` on a geometric grid of ratio 1.1, and
/// reports the smallest `N` whose forward differences are all `≥ -tol`.
#[allow(clippy::too_many_arguments)]
pub fn check_almost_monotonicity(
    field: &dyn SpaceTimeField,
    weight: &GaussianWeight,
    theta: f64,
    window: f64,
    samples: usize,
    n_max: f64,
    tolerance: f64,
    rule: &QuadratureRule,
) -> Result<MonotonicityReport> {
    let op = "check_almost_monotonicity";
    if !(theta > 0.0) || !(window > 0.0) || samples < 2 {
        return Err(ErrorKind::Precondition("Θ, window and sample count must be positive".into()).at("frequency", op));
    }
    let a = weight.offset();
    let times: Vec<f64> = (0..samples).map(|i| window * i as f64 / (samples - 1) as f64).collect();
    let freq: Vec<Result<FrequencySample>> = times.par_iter().map(|&t| frequency_at(field, weight, t, rule)).collect();
    let freq: Vec<f64> = freq.into_iter().map(|r| r.map(|s| s.n)).collect::<Result<_>>()?;
    let mut candidates = Vec::new();
    let mut minimal_n = None;
    let mut clipped = false;
    let mut n = 1.0_f64;
    while n <= n_max * (1.0 + 1e-12) {
        let log = (n * theta).ln();
        if n * log > 0.0 {
            let limit = 1.0 / (n * log) - a;
            let end = window.min(limit);
            clipped |= limit < window;
            let count = times.iter().take_while(|&&t| t <= end + 1e-12).count();
            let m: Vec<f64> = (0..count).map(|i| (n * times[i]).exp() * (freq[i] + n)).collect();
            let min_difference = m.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            let pass = count >= 2 && min_difference >= -tolerance;
            candidates.push(MonotonicityCandidate { n, window_end: end, samples: count, min_difference, pass });
            if pass {
                minimal_n = Some(n);
                break;
            }
        }
        n *= 1.1;
    }
    Ok(MonotonicityReport {
        offset: a,
        theta,
        tolerance,
        times,
        frequency: freq,
        candidates,
        minimal_n,
        window_clipped: clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::transform::Rescaled;
    use crate::oracles::find;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn rule() -> QuadratureRule {
        QuadratureRule::default()
    }

    #[test]
    fn closed_form_frequencies() {
        let x1 = find("x1").unwrap();
        for &a in &[0.25, 1.0, 4.0] {
            let w = GaussianWeight::new(1, a).unwrap();
            for &t in &[0.0, 0.5, 2.0] {
                let s = frequency_at(&*x1, &w, t, &rule()).unwrap();
                assert!((s.n - 1.0).abs() < 1e-8);
                assert!((s.h - 4.0 * (t + a) * PI.sqrt()).abs() < 1e-9 * s.h);
            }
        }
        let heat2 = find("heat2").unwrap();
        let w = GaussianWeight::new(1, 1.0).unwrap();
        let s = frequency_at(&*heat2, &w, 0.0, &rule()).unwrap();
        assert!((s.n - 4.0 / 3.0).abs() < 1e-8, "{s:?}");
        let one = find("const1").unwrap();
        let s = frequency_at(&*one, &w, 0.3, &rule()).unwrap();
        assert_eq!(s.d, 0.0);
        assert_eq!(s.n, 0.0);
    }

    #[test]
    fn identities_on_x1_squared() {
        let f = find("x1sq").unwrap();
        let w = GaussianWeight::new(1, 0.5).unwrap();
        let t = 0.25;
        let s = 0.75;
        let h = check_h_dot_identity(&*f, &w, t, 1e-4, &rule()).unwrap();
        assert!((h.rhs / (48.0 * s * PI.sqrt()) - 1.0).abs() < 1e-8);
        assert!(h.relative_residual < 1e-7);
        let d = check_d_dot_identity(&*f, &w, t, 1e-4, &rule()).unwrap();
        assert!((d.rhs / (16.0 * PI.sqrt()) - 1.0).abs() < 1e-8, "{d:?}");
        assert!(d.relative_residual < 1e-7);
        let b = check_frequency_derivative_bound(&*f, &w, t, 1e-6, &rule()).unwrap();
        assert!(b.n_dot.abs() < 1e-6 && (b.slack - 1.0 / (3.0 * s)).abs() < 1e-6);
    }

    #[test]
    fn sampled_fields_refuse_identity_checks() {
        let grid = crate::numerics::grid::SpaceTimeGrid::new(1, 4.0, 0.1, 1.0, 0.1).unwrap();
        let vals: Vec<f64> = vec![1.0; grid.space_nodes() * grid.time_levels()];
        let f = crate::numerics::field::ScalarField::from_values(grid, vals, "ones").unwrap();
        let w = GaussianWeight::new(1, 0.5).unwrap();
        let e = check_h_dot_identity(&f, &w, 0.5, 1e-4, &rule()).unwrap_err();
        assert_eq!(e.kind, ErrorKind::NonAnalytic);
    }

    #[test]
    fn rescaling_leaves_frequency_unchanged() {
        let f = find("heat3").unwrap();
        let lambda: f64 = 2.0;
        let g = Rescaled::new(f.clone(), lambda);
        let (t, a) = (0.4, 0.3);
        let n1 = frequency_at(&*f, &GaussianWeight::new(1, a).unwrap(), t, &rule()).unwrap().n;
        let l2 = lambda * lambda;
        let n2 = frequency_at(&g, &GaussianWeight::new(1, a / l2).unwrap(), t / l2, &rule()).unwrap().n;
        assert!((n1 - n2).abs() < 1e-9 * n1);
    }

    #[test]
    fn trace_csv_has_declared_columns() {
        let f = find("x1").unwrap();
        let w = GaussianWeight::new(1, 1.0).unwrap();
        let tr = trace(&*f, &w, &[0.0, 0.5], &rule()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,H,D,N,Hdot,Ndot\n"));
        assert_eq!(text.lines().count(), 3);
        assert!((tr.h_dot[1] - 4.0 * PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn caloric_monotonicity_scan_accepts_small_n() {
        let f: Arc<dyn SpaceTimeField> = find("heat2").unwrap();
        let w = GaussianWeight::new(1, 0.1).unwrap();
        let r = check_almost_monotonicity(&*f, &w, 2.0, 0.2, 11, 100.0, 1e-9, &rule()).unwrap();
        assert_eq!(r.minimal_n, Some(1.0));
    }
}
