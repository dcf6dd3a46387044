//! Exact solutions with closed-form derivatives.
//!
//! The catalog holds backward caloric polynomials (`Δu + ∂_t u = 0`),
//! homogeneous harmonic polynomials, constants and coordinates, and the
//! Gauss kernel in both time directions. Every flag is re-checked against the
//! closed forms by [`audit`].

pub mod poly;

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{ErrorKind, Result};
use crate::numerics::field::{Jet, ScalarField, SpaceTimeField};
use crate::numerics::grid::{SpaceTimeGrid, MAX_DIM};
use crate::numerics::region::{ball_integral, sphere_integral, square};
use poly::{backward_heat_polynomials, complex_power, Poly, T};

/// Time at which the backward Gauss kernel blows up.
pub const BACKWARD_KERNEL_TIME: f64 = 2.0;

#[derive(Debug, Clone)]
enum Closed {
    Polynomial { u: Poly, grad: [Poly; MAX_DIM], lap: Poly, dt: Poly },
    /// `(t + a)^{-n/2} e^{-|x|²/4(t+a)}`, forward caloric.
    ForwardKernel { offset: f64 },
    /// `(b - t)^{-n/2} e^{-|x|²/4(b-t)}`, backward caloric for `t < b`.
    BackwardKernel { blowup: f64 },
}

/// Which properties an oracle is claimed to have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleFlags {
    pub backward_caloric: bool,
    pub harmonic: bool,
    pub parabolic_degree: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    name: String,
    dim: usize,
    closed: Closed,
    flags: OracleFlags,
    formula: String,
}

impl OracleSolution {
    fn polynomial(name: impl Into<String>, dim: usize, u: Poly) -> Self {
        let grad = [u.derivative(0), u.derivative(1), u.derivative(2)];
        let lap = u.laplacian(dim);
        let dt = u.derivative(T);
        let flags = OracleFlags {
            backward_caloric: lap.add(&dt).is_zero(),
            harmonic: lap.is_zero() && dt.is_zero(),
            parabolic_degree: u.parabolic_degree(),
        };
        let formula = u.to_string();
        Self { name: name.into(), dim, closed: Closed::Polynomial { u, grad, lap, dt }, flags, formula }
    }

    /// The Gauss kernel `G_a` for fixed `a`, which solves the forward heat
    /// equation.
    pub fn forward_kernel(dim: usize, offset: f64) -> Self {
        Self {
            name: if dim == 1 { format!("gauss_fwd_a{offset}") } else { format!("gauss_fwd_a{offset}_n{dim}") },
            dim,
            closed: Closed::ForwardKernel { offset },
            flags: OracleFlags { backward_caloric: false, harmonic: false, parabolic_degree: None },
            formula: format!("(t+{offset})^(-{dim}/2) exp(-|x|^2/4(t+{offset}))"),
        }
    }

    /// The time-reversed Gauss kernel, backward caloric on `t < blowup`.
    pub fn backward_kernel(dim: usize, blowup: f64) -> Self {
        Self {
            name: if dim == 1 { format!("gauss_bwd_b{blowup}") } else { format!("gauss_bwd_b{blowup}_n{dim}") },
            dim,
            closed: Closed::BackwardKernel { blowup },
            flags: OracleFlags { backward_caloric: true, harmonic: false, parabolic_degree: None },
            formula: format!("({blowup}-t)^(-{dim}/2) exp(-|x|^2/4({blowup}-t))"),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn flags(&self) -> OracleFlags {
        self.flags
    }
    pub fn formula(&self) -> &str {
        &self.formula
    }

    /// Degree of a homogeneous harmonic polynomial.
    pub fn harmonic_degree(&self) -> Option<u32> {
        if self.flags.harmonic {
            self.flags.parabolic_degree
        } else {
            None
        }
    }

    pub fn polynomial_closed_form(&self) -> Option<&Poly> {
        match &self.closed {
            Closed::Polynomial { u, .. } => Some(u),
            _ => None,
        }
    }

    fn kernel_jet(&self, s: f64, x: &[f64], sign: f64) -> Jet {
        let n = self.dim as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let g = s.powf(-n / 2.0) * (-r2 / (4.0 * s)).exp();
        let mut grad = [0.0; MAX_DIM];
        for (d, gd) in grad.iter_mut().enumerate().take(self.dim) {
            *gd = -x[d] / (2.0 * s) * g;
        }
        let lap = (r2 / (4.0 * s * s) - n / (2.0 * s)) * g;
        Jet { value: g, gradient: grad, laplacian: lap, time_derivative: sign * lap }
    }

    /// Sum of absolute contributions to the value and to `Δu + ∂_t u`, used to
    /// scale residual tolerances.
    fn rounding_scale(&self, x: &[f64], t: f64) -> f64 {
        match &self.closed {
            Closed::Polynomial { u, lap, dt, .. } => u.eval_abs(x, t) + lap.eval_abs(x, t) + dt.eval_abs(x, t) + 1.0,
            _ => {
                let j = self.jet(x, t);
                j.value.abs() + j.laplacian.abs() + 1.0
            }
        }
    }
}

impl SpaceTimeField for OracleSolution {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        match &self.closed {
            Closed::Polynomial { u, grad, lap, dt } => {
                let mut g = [0.0; MAX_DIM];
                for (d, gd) in g.iter_mut().enumerate().take(self.dim) {
                    *gd = grad[d].eval(x, t);
                }
                Jet { value: u.eval(x, t), gradient: g, laplacian: lap.eval(x, t), time_derivative: dt.eval(x, t) }
            }
            Closed::ForwardKernel { offset } => self.kernel_jet(t + offset, x, 1.0),
            Closed::BackwardKernel { blowup } => self.kernel_jet(blowup - t, x, -1.0),
        }
    }

    fn time_domain(&self) -> (f64, f64) {
        match &self.closed {
            Closed::Polynomial { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Closed::ForwardKernel { offset } => (-offset, f64::INFINITY),
            Closed::BackwardKernel { blowup } => (f64::NEG_INFINITY, *blowup),
        }
    }

    fn polynomial_degree(&self) -> Option<u32> {
        match &self.closed {
            Closed::Polynomial { u, .. } => Some(u.spatial_degree()),
            _ => None,
        }
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

fn dim_suffix(dim: usize) -> String {
    if dim == 1 {
        String::new()
    } else {
        format!("_n{dim}")
    }
}

fn build_catalog() -> Vec<Arc<OracleSolution>> {
    let mut out = Vec::new();
    let mut push = |o: OracleSolution| out.push(Arc::new(o));
    for dim in 1..=3 {
        let sfx = dim_suffix(dim);
        push(OracleSolution::polynomial(format!("const1{sfx}"), dim, Poly::constant(1.0)));
        for i in 0..dim {
            push(OracleSolution::polynomial(format!("x{}{sfx}", i + 1), dim, Poly::var(i)));
        }
    }
    // backward caloric polynomials of parabolic degree 2..4
    let p1 = backward_heat_polynomials(0, 4);
    for (k, p) in p1.iter().enumerate().skip(2) {
        push(OracleSolution::polynomial(format!("heat{k}"), 1, p.clone()));
    }
    push(OracleSolution::polynomial("x1sq", 1, Poly::var(0).mul(&Poly::var(0))));
    let p2 = backward_heat_polynomials(1, 4);
    for j in 0..=4 {
        for k in 0..=(4 - j) {
            if j + k >= 2 {
                push(OracleSolution::polynomial(format!("heat{j}{k}_n2"), 2, p1[j].mul(&p2[k])));
            }
        }
    }
    let radial = Poly::var(0).mul(&Poly::var(0)).add(&Poly::var(1).mul(&Poly::var(1))).sub(&Poly::var(T).scale(4.0));
    push(OracleSolution::polynomial("heat_radial_n2", 2, radial));
    for k in 2..=6u32 {
        let (re, im) = complex_power(k);
        push(OracleSolution::polynomial(format!("harm_re{k}_n2"), 2, re));
        push(OracleSolution::polynomial(format!("harm_im{k}_n2"), 2, im));
    }
    let x = |i| Poly::var(i);
    let harmonic3 = [
        ("harm_x1x2_n3", x(0).mul(&x(1))),
        ("harm_x1x3_n3", x(0).mul(&x(2))),
        ("harm_x2x3_n3", x(1).mul(&x(2))),
        ("harm_x1x1_x2x2_n3", x(0).mul(&x(0)).sub(&x(1).mul(&x(1)))),
        ("harm_zonal_n3", x(0).mul(&x(0)).add(&x(1).mul(&x(1))).sub(&x(2).mul(&x(2)).scale(2.0))),
    ];
    for (name, p) in harmonic3 {
        push(OracleSolution::polynomial(name, 3, p));
    }
    for dim in 1..=3 {
        push(OracleSolution::backward_kernel(dim, BACKWARD_KERNEL_TIME));
    }
    push(OracleSolution::forward_kernel(1, 1.0));
    out
}

/// All oracles, in a fixed order.
pub fn catalog() -> &'static [Arc<OracleSolution>] {
    static CATALOG: OnceLock<Vec<Arc<OracleSolution>>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

pub fn find(name: &str) -> Result<Arc<OracleSolution>> {
    catalog()
        .iter()
        .find(|o| o.name() == name)
        .cloned()
        .ok_or_else(|| ErrorKind::Config(format!("unknown oracle '{name}'")).at("oracles", "find"))
}

/// Samples an oracle on a grid; derivatives stay analytic.
pub fn sample(oracle: Arc<OracleSolution>, grid: SpaceTimeGrid) -> Result<ScalarField> {
    ScalarField::sample_analytic(oracle, grid)
}

/// Result of re-checking one oracle's flags on a probe set.
#[derive(Debug, Clone, Serialize)]
pub struct FlagAudit {
    pub name: String,
    pub caloric_residual: f64,
    pub harmonic_residual: f64,
    pub homogeneity_residual: f64,
    pub ok: bool,
}

/// Residual tolerance, relative to the size of the terms being summed.
pub const FLAG_TOLERANCE: f64 = 1e-12;

fn probe_points(dim: usize) -> Vec<([f64; MAX_DIM], f64)> {
    let coords = [-1.5, -0.75, 0.0, 0.5, 1.25];
    let times = [0.0, 0.3, 1.0];
    let mut out = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        for (i, &c) in coords.iter().enumerate() {
            let mut x = [0.0; MAX_DIM];
            for (d, xd) in x.iter_mut().enumerate().take(dim) {
                *xd = coords[(i + d * 2 + k) % coords.len()] * if d == 1 { -1.0 } else { 1.0 } + 0.1 * d as f64;
            }
            x[0] = c;
            out.push((x, t));
        }
    }
    out
}

/// Re-verifies the flags of one oracle from its closed forms.
pub fn audit(oracle: &OracleSolution) -> FlagAudit {
    let n = oracle.dim;
    let flags = oracle.flags;
    let mut caloric: f64 = 0.0;
    let mut harmonic: f64 = 0.0;
    let mut homogeneity: f64 = 0.0;
    for (x, t) in probe_points(n) {
        let x = &x[..n];
        let scale = oracle.rounding_scale(x, t);
        let j = oracle.jet(x, t);
        if flags.backward_caloric {
            caloric = caloric.max(j.backward_heat().abs() / scale);
        }
        if flags.harmonic {
            harmonic = harmonic.max((j.laplacian.abs() + j.time_derivative.abs()) / scale);
        }
        if let Some(k) = flags.parabolic_degree {
            for lambda in [0.5_f64, 2.0] {
                let mut y = [0.0; MAX_DIM];
                for d in 0..n {
                    y[d] = lambda * x[d];
                }
                let lhs = oracle.value(&y[..n], lambda * lambda * t);
                let rhs = lambda.powi(k as i32) * j.value;
                let s = oracle.rounding_scale(&y[..n], lambda * lambda * t);
                homogeneity = homogeneity.max((lhs - rhs).abs() / s);
            }
        }
    }
    let ok = caloric <= FLAG_TOLERANCE && harmonic <= FLAG_TOLERANCE && homogeneity <= FLAG_TOLERANCE;
    FlagAudit {
        name: oracle.name.clone(),
        caloric_residual: caloric,
        harmonic_residual: harmonic,
        homogeneity_residual: homogeneity,
        ok,
    }
}

/// Audits the whole catalog; fails on the first oracle whose flags do not hold.
pub fn audit_catalog() -> Result<Vec<FlagAudit>> {
    let audits: Vec<FlagAudit> = catalog().iter().map(|o| audit(o)).collect();
    if let Some(bad) = audits.iter().find(|a| !a.ok) {
        return Err(ErrorKind::Precondition(format!("flags of '{}' fail re-verification", bad.name))
            .at("oracles", "catalog"));
    }
    Ok(audits)
}

/// Both sides of `∫_{B_r} u² = r^{2k+n}/(2k+n) ∫_{∂B_1} u² dσ` for a
/// homogeneous harmonic oracle of degree `k`.
pub fn harmonic_ball_identity(oracle: &OracleSolution, radius: f64) -> Result<(f64, f64)> {
    let k = oracle.harmonic_degree().ok_or_else(|| {
        ErrorKind::Precondition(format!("'{}' is not a homogeneous harmonic polynomial", oracle.name))
            .at("oracles", "harmonic_ball_identity")
    })?;
    let n = oracle.dim;
    let origin = [0.0; MAX_DIM];
    let lhs = ball_integral(oracle, 0.0, &origin[..n], radius, &square)?;
    let surface = sphere_integral(oracle, 0.0, &origin[..n], 1.0, &square);
    let p = (2 * k as usize + n) as f64;
    Ok((lhs, radius.powf(p) / p * surface))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_flags_verify() {
        let audits = audit_catalog().unwrap();
        assert!(audits.len() > 40);
        let names: Vec<&str> = catalog().iter().map(|o| o.name()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len(), "duplicate oracle names");
    }

    #[test]
    fn spot_checks() {
        let h2 = find("heat2").unwrap();
        assert!(h2.flags().backward_caloric && !h2.flags().harmonic);
        assert_eq!(h2.flags().parabolic_degree, Some(2));
        assert_eq!(h2.value(&[2.0], 4.0), 4.0 * h2.value(&[1.0], 1.0));
        let r2 = find("harm_re2_n2").unwrap();
        assert_eq!(r2.formula(), "x1^2-x2^2");
        assert_eq!(r2.harmonic_degree(), Some(2));
        let x1sq = find("x1sq").unwrap();
        assert!(!x1sq.flags().backward_caloric);
        let fwd = find("gauss_fwd_a1").unwrap();
        assert_eq!(fwd.value(&[0.0], 0.0), 1.0);
        assert!(!fwd.flags().backward_caloric);
    }

    #[test]
    fn sample_matches_closed_form() {
        let grid = SpaceTimeGrid::new(1, 1.0, 0.25, 1.0, 0.5).unwrap();
        let f = sample(find("x1").unwrap(), grid).unwrap();
        for i in 0..grid.nodes_per_axis() {
            assert_eq!(f.node_value(1, i), grid.coordinate(i));
        }
        let grid2 = SpaceTimeGrid::new(2, 1.0, 0.25, 1.0, 0.5).unwrap();
        assert!(sample(find("x1").unwrap(), grid2).is_err());
    }

    #[test]
    fn harmonic_identity_holds() {
        for o in catalog().iter().filter(|o| o.harmonic_degree().is_some() && o.dim > 1) {
            for r in [0.5, 1.0] {
                let (lhs, rhs) = harmonic_ball_identity(o, r).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "{} r={r}: {lhs} vs {rhs}", o.name());
            }
        }
    }
}
