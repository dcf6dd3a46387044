//! Gaussian-weighted quadrature over effectively unbounded domains.
//!
//! Integrals of the form `∫ F(x, f) G_a(x,t) dx` are evaluated with a
//! tensor-product trapezoid rule on a lattice centered at the weight's center
//! with spacing `min(sqrt(s)/q, feature_scale)`, truncated at
//! [`effective_radius`]. The Gaussian factor's peak `s^{-n/2}` is pulled out
//! before summation so only `exp(-|x-y|^2/4s) <= 1` enters the sums.

use std::sync::Arc;

use std::sync::OnceLock;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{Jet, SpaceTimeField};
use super::grid::MAX_DIM;
use super::weight::{effective_radius, tail_fraction, GaussianWeight};
use crate::error::{ErrorKind, Result};

pub type CustomIntegrand = Arc<dyn Fn(&[f64], &Jet) -> f64 + Send + Sync>;

/// What multiplies the Gaussian weight.
#[derive(Clone)]
pub enum IntegrandKind {
    /// `f^2`
    ValueSq,
    /// `|∇f|^2`
    GradSq,
    /// `(Δf + ∂_t f)^2`
    BackwardHeatSq,
    /// `|x - y|^p f^2`
    DistPowValueSq(f64),
    /// Arbitrary (possibly signed) integrand of the point and the field's jet.
    Custom(CustomIntegrand),
}

impl std::fmt::Debug for IntegrandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegrandKind::ValueSq => write!(f, "ValueSq"),
            IntegrandKind::GradSq => write!(f, "GradSq"),
            IntegrandKind::BackwardHeatSq => write!(f, "BackwardHeatSq"),
            IntegrandKind::DistPowValueSq(p) => write!(f, "DistPowValueSq({p})"),
            IntegrandKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl IntegrandKind {
    pub fn custom(f: impl Fn(&[f64], &Jet) -> f64 + Send + Sync + 'static) -> Self {
        IntegrandKind::Custom(Arc::new(f))
    }

    fn eval(&self, x: &[f64], dist_sq: f64, jet: &Jet) -> f64 {
        match self {
            IntegrandKind::ValueSq => jet.value * jet.value,
            IntegrandKind::GradSq => jet.grad_norm_sq(),
            IntegrandKind::BackwardHeatSq => jet.backward_heat().powi(2),
            IntegrandKind::DistPowValueSq(p) => {
                if dist_sq == 0.0 {
                    if *p == 0.0 {
                        jet.value * jet.value
                    } else {
                        0.0
                    }
                } else {
                    dist_sq.powf(0.5 * p) * jet.value * jet.value
                }
            }
            IntegrandKind::Custom(f) => f(x, jet),
        }
    }
}

/// Lattice parameters for [`weighted_integrals`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureRule {
    /// Relative truncation tolerance.
    pub tol: f64,
    /// Lattice points per `sqrt(t + a)`.
    pub points_per_sigma: f64,
    /// Number of radius extensions tried before giving up.
    pub max_extensions: usize,
    /// The initial lattice radius keeps a `tol * radius_safety` tail, so the
    /// truncation error sits well below the tolerance.
    pub radius_safety: f64,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self { tol: 1e-8, points_per_sigma: 4.0, max_extensions: 8, radius_safety: 1e-4 }
    }
}

/// A quadrature value with its error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Gaussian tail bound beyond the lattice times the integrand envelope on
    /// the lattice boundary.
    pub truncation_error: f64,
    /// `|S_h - S_2h|`, a conservative bound on the lattice-sum error.
    pub discretization_error: f64,
    /// `∫ |F| G`, the scale against which relative errors are judged.
    pub magnitude: f64,
}

impl Quadrature {
    pub fn error(&self) -> f64 {
        self.truncation_error + self.discretization_error
    }
}

struct Lattice {
    dim: usize,
    center: [f64; MAX_DIM],
    spacing: f64,
    lo: [i64; MAX_DIM],
    hi: [i64; MAX_DIM],
    /// Distance from the center to the nearest lattice face.
    reach: f64,
    covers_support: bool,
}

impl Lattice {
    fn build(dim: usize, center: &[f64], spacing: f64, radius: f64, support: Option<f64>) -> Self {
        let m = (radius / spacing).ceil() as i64;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        let mut c = [0.0; MAX_DIM];
        let mut covers_support = support.is_some();
        let mut reach = f64::INFINITY;
        for d in 0..dim {
            c[d] = center[d];
            let (mut l, mut h) = (-m, m);
            if let Some(s) = support {
                let lo_s = ((-s - center[d]) / spacing).floor() as i64;
                let hi_s = ((s - center[d]) / spacing).ceil() as i64;
                if lo_s >= l {
                    l = lo_s;
                } else {
                    covers_support = false;
                }
                if hi_s <= h {
                    h = hi_s;
                } else {
                    covers_support = false;
                }
            }
            let h = h.max(l);
            reach = reach.min((-l as f64 * spacing).max(0.0)).min((h as f64 * spacing).max(0.0));
            lo[d] = l;
            hi[d] = h;
        }
        Self { dim, center: c, spacing, lo, hi, reach, covers_support }
    }
}

#[derive(Clone)]
struct Partial {
    fine: Vec<f64>,
    coarse: Vec<f64>,
    abs: Vec<f64>,
    shell: Vec<f64>,
}

impl Partial {
    fn new(k: usize) -> Self {
        Self { fine: vec![0.0; k], coarse: vec![0.0; k], abs: vec![0.0; k], shell: vec![0.0; k] }
    }
}

fn sum_lattice(
    field: &dyn SpaceTimeField,
    t: f64,
    weight: &GaussianWeight,
    kinds: &[IntegrandKind],
    lat: &Lattice,
) -> Partial {
    let s = weight.scale(t);
    let n = lat.dim;
    let inv4s = 1.0 / (4.0 * s);
    let first: Vec<i64> = (lat.lo[0]..=lat.hi[0]).collect();
    let slabs: Vec<Partial> = first
        .par_iter()
        .map(|&i0| {
            let mut acc = Partial::new(kinds.len());
            let mut idx = [0i64; MAX_DIM];
            idx[0] = i0;
            for d in 1..n {
                idx[d] = lat.lo[d];
            }
            let mut x = [0.0; MAX_DIM];
            loop {
                let mut dist_sq = 0.0;
                let mut all_even = true;
                let mut on_shell = false;
                for d in 0..n {
                    x[d] = lat.center[d] + idx[d] as f64 * lat.spacing;
                    let dx = x[d] - weight.center()[d];
                    dist_sq += dx * dx;
                    all_even &= idx[d] % 2 == 0;
                    on_shell |= idx[d] == lat.lo[d] || idx[d] == lat.hi[d];
                }
                let e = (-dist_sq * inv4s).exp();
                if e > 0.0 {
                    let jet = field.jet(&x[..n], t);
                    for (k, kind) in kinds.iter().enumerate() {
                        let v = kind.eval(&x[..n], dist_sq, &jet);
                        acc.fine[k] += v * e;
                        acc.abs[k] += v.abs() * e;
                        if all_even {
                            acc.coarse[k] += v * e;
                        }
                        if on_shell {
                            acc.shell[k] = acc.shell[k].max(v.abs());
                        }
                    }
                } else if on_shell {
                    let jet = field.jet(&x[..n], t);
                    for (k, kind) in kinds.iter().enumerate() {
                        let v = kind.eval(&x[..n], dist_sq, &jet);
                        acc.shell[k] = acc.shell[k].max(v.abs());
                    }
                }
                // odometer over the trailing axes
                let mut d = n;
                loop {
                    if d == 1 {
                        return acc;
                    }
                    d -= 1;
                    if idx[d] < lat.hi[d] {
                        idx[d] += 1;
                        break;
                    }
                    idx[d] = lat.lo[d];
                }
            }
        })
        .collect();
    let mut total = Partial::new(kinds.len());
    for slab in &slabs {
        for k in 0..kinds.len() {
            total.fine[k] += slab.fine[k];
            total.coarse[k] += slab.coarse[k];
            total.abs[k] += slab.abs[k];
            total.shell[k] = total.shell[k].max(slab.shell[k]);
        }
    }
    total
}

/// Evaluates several Gaussian-weighted integrals of one field slice in a
/// single lattice pass.
pub fn weighted_integrals(
    field: &dyn SpaceTimeField,
    t: f64,
    weight: &GaussianWeight,
    kinds: &[IntegrandKind],
    rule: &QuadratureRule,
) -> Result<Vec<Quadrature>> {
    let op = "weighted_integral";
    let n = weight.dim();
    if field.dim() != n {
        return Err(ErrorKind::DimensionMismatch { expected: n, found: field.dim() }.at("numerics", op));
    }
    let s = weight.scale(t);
    if !(s > 0.0) {
        return Err(ErrorKind::Domain(format!("t + a = {s} must be positive")).at("numerics", op));
    }
    if let Some(out) = hermite_integrals(field, t, weight, kinds, rule)? {
        return Ok(out);
    }
    let sqrt_s = s.sqrt();
    let spacing = (sqrt_s / rule.points_per_sigma).min(field.feature_scale());
    let prefactor = s.powf(-0.5 * n as f64) * spacing.powi(n as i32);
    let coarse_prefactor = prefactor * 2f64.powi(n as i32);
    let mut radius = effective_radius(weight.offset(), t, rule.tol * rule.radius_safety, n);

    let mut attempt = 0;
    loop {
        let lat = Lattice::build(n, weight.center(), spacing, radius, field.support_half_width());
        let sums = sum_lattice(field, t, weight, kinds, &lat);
        let mut out = Vec::with_capacity(kinds.len());
        let mut worst_excess: f64 = 0.0;
        let mut worst = (0.0, 0.0);
        for k in 0..kinds.len() {
            let value = sums.fine[k] * prefactor;
            let magnitude = sums.abs[k] * prefactor;
            if !value.is_finite() || !magnitude.is_finite() {
                return Err(ErrorKind::NonFinite.at("numerics", op));
            }
            let rho = lat.reach / (2.0 * sqrt_s);
            let truncation_error = sums.shell[k] * n as f64 * tail_fraction(rho, 1) * weight.mass();
            let discretization_error = (value - sums.coarse[k] * coarse_prefactor).abs();
            let allowed = rule.tol * magnitude;
            if truncation_error > allowed && truncation_error - allowed > worst_excess {
                worst_excess = truncation_error - allowed;
                worst = (truncation_error, allowed);
            }
            out.push(Quadrature { value, truncation_error, discretization_error, magnitude });
        }
        if worst_excess == 0.0 {
            return Ok(out);
        }
        if attempt >= rule.max_extensions || lat.covers_support {
            return Err(ErrorKind::GridTooSmall { estimate: worst.0, tolerance: worst.1 }.at("numerics", op));
        }
        radius += 1.5 * sqrt_s;
        attempt += 1;
    }
}

const MAX_HERMITE_NODES: usize = 40;

fn hermite_rule(m: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=MAX_HERMITE_NODES)
            .map(|m| match GaussHermite::new(m) {
                Ok(rule) => rule.as_node_weight_pairs().to_vec(),
                Err(_) => Vec::new(),
            })
            .collect()
    });
    &rules[m]
}

/// Tensor Gauss-Hermite sum after `x = y + 2 sqrt(s) ξ`, for fields that
/// are polynomial in space. Two rule sizes are compared, and `None` sends the
/// caller back to the lattice whenever they disagree.
fn hermite_integrals(
    field: &dyn SpaceTimeField,
    t: f64,
    weight: &GaussianWeight,
    kinds: &[IntegrandKind],
    rule: &QuadratureRule,
) -> Result<Option<Vec<Quadrature>>> {
    let Some(p) = field.polynomial_degree() else { return Ok(None) };
    let polynomial_kinds = kinds.iter().all(|k| match k {
        IntegrandKind::DistPowValueSq(q) => *q >= 0.0 && q.fract() == 0.0 && (*q as i64) % 2 == 0,
        _ => true,
    });
    let m = p as usize + 6;
    if !polynomial_kinds || m + 2 > MAX_HERMITE_NODES {
        return Ok(None);
    }
    let n = weight.dim();
    let two_sqrt_s = 2.0 * weight.scale(t).sqrt();
    let scale = 2f64.powi(n as i32);
    let sweep = |m: usize| -> (Vec<f64>, Vec<f64>) {
        let nodes = hermite_rule(m);
        let mut value = vec![0.0; kinds.len()];
        let mut magnitude = vec![0.0; kinds.len()];
        let mut idx = [0usize; MAX_DIM];
        let mut x = [0.0; MAX_DIM];
        loop {
            let mut w = scale;
            let mut dist_sq = 0.0;
            for d in 0..n {
                let (xi, wi) = nodes[idx[d]];
                let dx = two_sqrt_s * xi;
                x[d] = weight.center()[d] + dx;
                dist_sq += dx * dx;
                w *= wi;
            }
            let jet = field.jet(&x[..n], t);
            for (k, kind) in kinds.iter().enumerate() {
                let v = kind.eval(&x[..n], dist_sq, &jet);
                value[k] += v * w;
                magnitude[k] += v.abs() * w;
            }
            let mut d = 0;
            loop {
                if d == n {
                    return (value, magnitude);
                }
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    };
    let (coarse, _) = sweep(m);
    let (fine, magnitude) = sweep(m + 2);
    let mut out = Vec::with_capacity(kinds.len());
    for k in 0..kinds.len() {
        if !fine[k].is_finite() || !magnitude[k].is_finite() {
            return Err(ErrorKind::NonFinite.at("numerics", "weighted_integral"));
        }
        let discretization_error = (fine[k] - coarse[k]).abs();
        if discretization_error > rule.tol * magnitude[k] {
            return Ok(None);
        }
        out.push(Quadrature { value: fine[k], truncation_error: 0.0, discretization_error, magnitude: magnitude[k] });
    }
    Ok(Some(out))
}

/// Single-integrand convenience wrapper around [`weighted_integrals`].
pub fn weighted_integral(
    field: &dyn SpaceTimeField,
    t: f64,
    weight: &GaussianWeight,
    kind: IntegrandKind,
    rule: &QuadratureRule,
) -> Result<Quadrature> {
    Ok(weighted_integrals(field, t, weight, std::slice::from_ref(&kind), rule)?[0])
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(order.max(2)).expect("order >= 2").as_node_weight_pairs().to_vec()
}

/// Composite Gauss-Legendre rule on `[a, b]` split at the given breakpoints
/// (which must be sorted and lie inside `(a, b)`).
pub fn composite_gauss_legendre(a: f64, b: f64, breaks: &[f64], base: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(a);
    let margin = 1e-12 * (b - a);
    edges.extend(breaks.iter().copied().filter(|&x| x > a + margin && x < b - margin));
    edges.push(b);
    let mut out = Vec::with_capacity((edges.len() - 1) * base.len());
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for &(x, wt) in base {
            out.push((mid + half * x, half * wt));
        }
    }
    out
}

/// Uniform breakpoints splitting `[a, b]` into `panels` pieces.
pub fn uniform_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (1..panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    struct Poly1(fn(f64) -> (f64, f64));
    impl SpaceTimeField for Poly1 {
        fn dim(&self) -> usize {
            1
        }
        fn jet(&self, x: &[f64], _t: f64) -> Jet {
            let (v, g) = (self.0)(x[0]);
            Jet { value: v, gradient: [g, 0.0, 0.0], ..Jet::ZERO }
        }
        fn label(&self) -> String {
            "poly".into()
        }
    }

    struct Const(usize);
    impl SpaceTimeField for Const {
        fn dim(&self) -> usize {
            self.0
        }
        fn jet(&self, _x: &[f64], _t: f64) -> Jet {
            Jet { value: 1.0, ..Jet::ZERO }
        }
        fn label(&self) -> String {
            "one".into()
        }
    }

    #[test]
    fn gaussian_mass_all_dimensions() {
        let rule = QuadratureRule::default();
        for dim in 1..=3 {
            for &(t, a) in &[(0.0, 1e-3), (0.5, 0.25), (3.0, 1.0)] {
                let w = GaussianWeight::new(dim, a).unwrap();
                let q = weighted_integral(&Const(dim), t, &w, IntegrandKind::ValueSq, &rule).unwrap();
                let exact = (4.0 * PI).powf(dim as f64 / 2.0);
                assert!((q.value / exact - 1.0).abs() < 1e-9, "dim {dim} t {t} a {a}: {}", q.value);
            }
        }
    }

    #[test]
    fn one_dimensional_moments() {
        let rule = QuadratureRule::default();
        let w = GaussianWeight::new(1, 0.5).unwrap();
        let s = 0.5 + 0.25;
        let q = weighted_integral(&Poly1(|x| (x, 1.0)), 0.25, &w, IntegrandKind::ValueSq, &rule).unwrap();
        assert!((q.value / (2.0 * s * 2.0 * PI.sqrt()) - 1.0).abs() < 1e-9);
        let zero = weighted_integral(&Poly1(|_| (0.0, 0.0)), 0.25, &w, IntegrandKind::ValueSq, &rule).unwrap();
        assert_eq!(zero.value, 0.0);
        // x^4 f^2 with f = x^2: m_8 = 1680 s^4 per unit mass
        let q8 = weighted_integral(&Poly1(|x| (x * x, 2.0 * x)), 0.25, &w, IntegrandKind::DistPowValueSq(4.0), &rule)
            .unwrap();
        assert!((q8.value / (1680.0 * s.powi(4) * 2.0 * PI.sqrt()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn supported_field_has_no_truncation() {
        struct Bump;
        impl SpaceTimeField for Bump {
            fn dim(&self) -> usize {
                1
            }
            fn jet(&self, x: &[f64], _t: f64) -> Jet {
                let v = if x[0].abs() < 1.0 { 1.0 - x[0] * x[0] } else { 0.0 };
                Jet { value: v, ..Jet::ZERO }
            }
            fn support_half_width(&self) -> Option<f64> {
                Some(1.0)
            }
            fn feature_scale(&self) -> f64 {
                0.01
            }
            fn label(&self) -> String {
                "bump".into()
            }
        }
        let w = GaussianWeight::new(1, 100.0).unwrap();
        let q = weighted_integral(&Bump, 0.0, &w, IntegrandKind::ValueSq, &QuadratureRule::default()).unwrap();
        assert_eq!(q.truncation_error, 0.0);
        // ∫(1-x^2)^2 = 16/15, weight ≈ 0.1 exp(-x^2/400)
        assert!((q.value / (16.0 / 15.0 * 0.1) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn composite_rule_integrates_polynomials() {
        let base = gauss_legendre(4);
        let rule = composite_gauss_legendre(-1.0, 2.0, &uniform_breaks(-1.0, 2.0, 3), &base);
        let v: f64 = rule.iter().map(|(x, w)| w * x.powi(6)).sum();
        assert!((v - (128.0 + 1.0) / 7.0).abs() < 1e-12);
    }

    struct Opaque(Arc<dyn SpaceTimeField>);
    impl SpaceTimeField for Opaque {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn jet(&self, x: &[f64], t: f64) -> Jet {
            self.0.jet(x, t)
        }
        fn label(&self) -> String {
            self.0.label()
        }
    }

    #[test]
    fn hermite_path_agrees_with_lattice() {
        let kinds = [IntegrandKind::ValueSq, IntegrandKind::GradSq, IntegrandKind::DistPowValueSq(2.0)];
        let rule = QuadratureRule::default();
        let mut checked = 0;
        for o in crate::oracles::catalog().iter().filter(|o| o.polynomial_degree().is_some() && o.dim() <= 2) {
            let w = GaussianWeight::centered(o.dim(), &[0.3, -0.1][..o.dim()], 0.5).unwrap();
            let fast = weighted_integrals(&**o, 0.2, &w, &kinds, &rule).unwrap();
            let slow = weighted_integrals(&Opaque(o.clone()), 0.2, &w, &kinds, &rule).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                assert_eq!(a.truncation_error, 0.0);
                assert!((a.value - b.value).abs() <= 1e-7 * b.magnitude.max(1e-300), "{}: {a:?} {b:?}", o.label());
            }
            checked += 1;
        }
        assert!(checked > 5);
    }
}
