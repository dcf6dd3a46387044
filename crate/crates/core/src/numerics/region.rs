use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::field::{Jet, SpaceTimeField};
use super::grid::MAX_DIM;
use super::quadrature::{composite_gauss_legendre, gauss_legendre, uniform_breaks};
use crate::error::{ErrorKind, Result};

/// A ball `B_r(z)` or a parabolic cylinder `Q_r(z, τ) = B_r(z) × [τ, τ + r²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: [f64; MAX_DIM], radius: f64 },
    Cylinder { center: [f64; MAX_DIM], radius: f64, base_time: f64 },
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball { center: pad(center), radius }
    }

    pub fn cylinder(center: &[f64], radius: f64, base_time: f64) -> Self {
        Region::Cylinder { center: pad(center), radius, base_time }
    }

    /// `B_r` or `Q_r` centered at the origin.
    pub fn centered_ball(radius: f64) -> Self {
        Self::ball(&[0.0; MAX_DIM], radius)
    }

    pub fn centered_cylinder(radius: f64) -> Self {
        Self::cylinder(&[0.0; MAX_DIM], radius, 0.0)
    }

    pub fn radius(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } | Region::Cylinder { radius, .. } => *radius,
        }
    }

    pub fn center(&self) -> &[f64; MAX_DIM] {
        match self {
            Region::Ball { center, .. } | Region::Cylinder { center, .. } => center,
        }
    }

    /// Time interval of a cylinder.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        match self {
            Region::Ball { .. } => None,
            Region::Cylinder { radius, base_time, .. } => Some((*base_time, base_time + radius * radius)),
        }
    }
}

fn pad(x: &[f64]) -> [f64; MAX_DIM] {
    let mut c = [0.0; MAX_DIM];
    c[..x.len().min(MAX_DIM)].copy_from_slice(&x[..x.len().min(MAX_DIM)]);
    c
}

fn check_inside(field: &dyn SpaceTimeField, center: &[f64], radius: f64, op: &'static str) -> Result<()> {
    if !(radius > 0.0) {
        return Err(ErrorKind::Domain(format!("radius {radius} must be positive")).at("numerics", op));
    }
    if field.is_analytic() {
        return Ok(());
    }
    if let Some(l) = field.support_half_width() {
        for &c in &center[..field.dim()] {
            if c.abs() + radius > l + 1e-12 {
                return Err(ErrorKind::RegionExceedsGrid(format!("ball of radius {radius} about {c} leaves [-{l}, {l}]"))
                    .at("numerics", op));
            }
        }
    }
    Ok(())
}

/// Plain integral of `integrand(jet)` over `B_r(z)` at time `t`.
///
/// Uses Gauss-Legendre in the radial (or, for n = 1, linear) direction and a
/// periodic trapezoid rule in angle; panel widths follow the field's feature
/// scale.
pub fn ball_integral(
    field: &dyn SpaceTimeField,
    t: f64,
    center: &[f64],
    radius: f64,
    integrand: &dyn Fn(&Jet) -> f64,
) -> Result<f64> {
    ball_integral_of_degree(field, t, center, radius, integrand, None)
}

/// [`ball_integral`] for an integrand known to be a polynomial of the given
/// degree in `x`, integrated exactly with the smallest product rule.
pub fn ball_integral_of_degree(
    field: &dyn SpaceTimeField,
    t: f64,
    center: &[f64],
    radius: f64,
    integrand: &dyn Fn(&Jet) -> f64,
    degree: Option<u32>,
) -> Result<f64> {
    check_inside(field, center, radius, "ball_integral")?;
    if let Some(d) = degree {
        let value = exact_ball(field, t, center, radius, integrand, d as usize);
        if !value.is_finite() {
            return Err(ErrorKind::NonFinite.at("numerics", "ball_integral"));
        }
        return Ok(value);
    }
    let n = field.dim();
    let feature = field.feature_scale();
    let mut x = [0.0; MAX_DIM];
    let value = match n {
        1 => {
            let (a, b) = (center[0] - radius, center[0] + radius);
            let (breaks, order) = if feature.is_finite() && !field.is_analytic() {
                // panel edges on the sampling nodes: the cubic interpolant is a
                // polynomial on each cell
                let h = 2.0 * feature;
                let first = (a / h).ceil() as i64;
                let last = (b / h).floor() as i64;
                ((first..=last).map(|i| i as f64 * h).collect::<Vec<_>>(), 4)
            } else {
                let panels = if feature.is_finite() { ((b - a) / feature).ceil() as usize } else { 4 };
                (uniform_breaks(a, b, panels.max(4)), 8)
            };
            let rule = composite_gauss_legendre(a, b, &breaks, &gauss_legendre(order));
            rule.iter()
                .map(|&(xi, w)| {
                    x[0] = xi;
                    w * integrand(&field.jet(&x[..1], t))
                })
                .sum()
        }
        2 => {
            let panels = radial_panels(radius, feature);
            let radial = composite_gauss_legendre(0.0, radius, &uniform_breaks(0.0, radius, panels), &gauss_legendre(8));
            let m = angular_nodes(radius, feature);
            let dtheta = 2.0 * PI / m as f64;
            let mut total = 0.0;
            for &(rho, wr) in &radial {
                let mut ring = 0.0;
                for j in 0..m {
                    let th = j as f64 * dtheta;
                    x[0] = center[0] + rho * th.cos();
                    x[1] = center[1] + rho * th.sin();
                    ring += integrand(&field.jet(&x[..2], t));
                }
                total += wr * rho * ring * dtheta;
            }
            total
        }
        _ => {
            let panels = radial_panels(radius, feature);
            let radial = composite_gauss_legendre(0.0, radius, &uniform_breaks(0.0, radius, panels), &gauss_legendre(8));
            let dirs = sphere_directions(radius, feature);
            let mut total = 0.0;
            for &(rho, wr) in &radial {
                let mut shell = 0.0;
                for &(d, w) in &dirs {
                    for k in 0..3 {
                        x[k] = center[k] + rho * d[k];
                    }
                    shell += w * integrand(&field.jet(&x[..3], t));
                }
                total += wr * rho * rho * shell;
            }
            total
        }
    };
    if !value.is_finite() {
        return Err(ErrorKind::NonFinite.at("numerics", "ball_integral"));
    }
    Ok(value)
}

fn exact_ball(
    field: &dyn SpaceTimeField,
    t: f64,
    center: &[f64],
    radius: f64,
    integrand: &dyn Fn(&Jet) -> f64,
    degree: usize,
) -> f64 {
    let n = field.dim();
    let mut x = [0.0; MAX_DIM];
    if n == 1 {
        let rule = composite_gauss_legendre(center[0] - radius, center[0] + radius, &[], &gauss_legendre(degree / 2 + 2));
        return rule
            .iter()
            .map(|&(xi, w)| {
                x[0] = xi;
                w * integrand(&field.jet(&x[..1], t))
            })
            .sum();
    }
    let radial = composite_gauss_legendre(0.0, radius, &[], &gauss_legendre(degree / 2 + 3));
    let m = degree + 2;
    let dphi = 2.0 * PI / m as f64;
    let polar = if n == 2 { vec![(0.0, 1.0)] } else { gauss_legendre(degree / 2 + 2) };
    let mut total = 0.0;
    for &(rho, wr) in &radial {
        let mut shell = 0.0;
        for &(c, wc) in &polar {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..m {
                let ph = j as f64 * dphi;
                x[0] = center[0] + rho * s * ph.cos();
                x[1] = center[1] + rho * s * ph.sin();
                if n == 3 {
                    x[2] = center[2] + rho * c;
                }
                shell += wc * dphi * integrand(&field.jet(&x[..n], t));
            }
        }
        total += wr * rho.powi(n as i32 - 1) * shell;
    }
    total
}

fn radial_panels(radius: f64, feature: f64) -> usize {
    if feature.is_finite() {
        ((radius / feature).ceil() as usize).max(4)
    } else {
        4
    }
}

fn angular_nodes(radius: f64, feature: f64) -> usize {
    if feature.is_finite() {
        ((2.0 * PI * radius / feature).ceil() as usize).max(64)
    } else {
        64
    }
}

/// Product rule on the unit sphere: Gauss-Legendre in `cos φ`, trapezoid in
/// azimuth.
fn sphere_directions(radius: f64, feature: f64) -> Vec<([f64; 3], f64)> {
    let m = angular_nodes(radius, feature);
    let polar = gauss_legendre((m / 2).max(24));
    let d = 2.0 * PI / m as f64;
    let mut out = Vec::with_capacity(polar.len() * m);
    for &(c, w) in &polar {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for j in 0..m {
            let ph = j as f64 * d;
            out.push(([s * ph.cos(), s * ph.sin(), c], w * d));
        }
    }
    out
}

/// Integral over `Q_r(z, τ) = B_r(z) × [τ, τ + r²]` of ball slices.
///
/// Sampled fields use the trapezoid rule on their time levels (or on
/// `time_panels` panels); closed-form fields use 16 Gauss-Legendre panels of
/// order 8 unless `time_panels` is given.
pub fn cylinder_integral(
    field: &dyn SpaceTimeField,
    center: &[f64],
    radius: f64,
    base_time: f64,
    time_panels: Option<usize>,
    integrand: &(dyn Fn(&Jet) -> f64 + Sync),
) -> Result<f64> {
    cylinder_integral_of_degree(field, center, radius, base_time, time_panels, integrand, None)
}

/// [`cylinder_integral`] with the spatial degree hint of
/// [`ball_integral_of_degree`].
pub fn cylinder_integral_of_degree(
    field: &dyn SpaceTimeField,
    center: &[f64],
    radius: f64,
    base_time: f64,
    time_panels: Option<usize>,
    integrand: &(dyn Fn(&Jet) -> f64 + Sync),
    degree: Option<u32>,
) -> Result<f64> {
    use rayon::prelude::*;
    check_inside(field, center, radius, "cylinder_integral")?;
    let (t0, t1) = (base_time, base_time + radius * radius);
    let (lo, hi) = field.time_domain();
    if t0 < lo - 1e-12 || t1 > hi + 1e-12 {
        return Err(ErrorKind::RegionExceedsGrid(format!("time span [{t0}, {t1}] outside field domain [{lo}, {hi}]"))
            .at("numerics", "cylinder_integral"));
    }
    let dt_field = field.time_scale();
    let nodes: Vec<(f64, f64)> = if dt_field.is_finite() || time_panels.is_some() {
        let panels = time_panels.unwrap_or_else(|| ((t1 - t0) / dt_field).round().max(1.0) as usize);
        let dt = (t1 - t0) / panels as f64;
        (0..=panels)
            .map(|j| {
                let w = if j == 0 || j == panels { 0.5 } else { 1.0 };
                ((t0 + j as f64 * dt).min(t1), w * dt)
            })
            .collect()
    } else {
        composite_gauss_legendre(t0, t1, &uniform_breaks(t0, t1, 16), &gauss_legendre(8))
    };
    let slices: Vec<Result<f64>> =
        nodes.par_iter().map(|&(t, w)| Ok(w * ball_integral_of_degree(field, t, center, radius, integrand, degree)?)).collect();
    let mut total = 0.0;
    for s in slices {
        total += s?;
    }
    Ok(total)
}

/// `∫_{∂B_r(z)} integrand dσ` at time `t`: 4096-node trapezoid on the circle
/// in two dimensions, the product rule of order 63 on the sphere in three,
/// and the two-point sum in one.
pub fn sphere_integral(
    field: &dyn SpaceTimeField,
    t: f64,
    center: &[f64],
    radius: f64,
    integrand: &dyn Fn(&Jet) -> f64,
) -> f64 {
    let mut x = [0.0; MAX_DIM];
    match field.dim() {
        1 => {
            x[0] = center[0] + radius;
            let a = integrand(&field.jet(&x[..1], t));
            x[0] = center[0] - radius;
            a + integrand(&field.jet(&x[..1], t))
        }
        2 => {
            let m = 4096;
            let d = 2.0 * PI / m as f64;
            let mut sum = 0.0;
            for j in 0..m {
                let th = j as f64 * d;
                x[0] = center[0] + radius * th.cos();
                x[1] = center[1] + radius * th.sin();
                sum += integrand(&field.jet(&x[..2], t));
            }
            sum * d * radius
        }
        _ => {
            let polar = gauss_legendre(32);
            let m = 64;
            let d = 2.0 * PI / m as f64;
            let mut sum = 0.0;
            for &(c, w) in &polar {
                let s = (1.0 - c * c).sqrt();
                for j in 0..m {
                    let ph = j as f64 * d;
                    x[0] = center[0] + radius * s * ph.cos();
                    x[1] = center[1] + radius * s * ph.sin();
                    x[2] = center[2] + radius * c;
                    sum += w * d * integrand(&field.jet(&x[..3], t));
                }
            }
            sum * radius * radius
        }
    }
}

/// `f^2` integrand.
pub fn square(jet: &Jet) -> f64 {
    jet.value * jet.value
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Coord(usize, usize);
    impl SpaceTimeField for Coord {
        fn dim(&self) -> usize {
            self.0
        }
        fn jet(&self, x: &[f64], _t: f64) -> Jet {
            let mut g = [0.0; MAX_DIM];
            g[self.1] = 1.0;
            Jet { value: x[self.1], gradient: g, ..Jet::ZERO }
        }
        fn label(&self) -> String {
            "x".into()
        }
    }

    struct One(usize);
    impl SpaceTimeField for One {
        fn dim(&self) -> usize {
            self.0
        }
        fn jet(&self, _x: &[f64], _t: f64) -> Jet {
            Jet { value: 1.0, ..Jet::ZERO }
        }
        fn label(&self) -> String {
            "1".into()
        }
    }

    #[test]
    fn unit_disk_area() {
        let v = ball_integral(&One(2), 0.0, &[0.0, 0.0], 1.0, &square).unwrap();
        assert!((v - PI).abs() < 1e-12);
    }

    #[test]
    fn polar_moment() {
        for &r in &[0.25, 1.0, 3.0] {
            let v = ball_integral(&Coord(2, 0), 0.0, &[0.0, 0.0], r, &square).unwrap();
            assert!((v - PI * r.powi(4) / 4.0).abs() < 1e-12 * r.powi(4));
        }
    }

    #[test]
    fn ball_volumes() {
        let v1 = ball_integral(&One(1), 0.0, &[0.3], 2.0, &square).unwrap();
        assert!((v1 - 4.0).abs() < 1e-13);
        let v3 = ball_integral(&One(3), 0.0, &[0.0, 0.1, 0.0], 0.5, &square).unwrap();
        assert!((v3 - 4.0 / 3.0 * PI * 0.125).abs() < 1e-12);
        // ∫_{B_1} x^2 in 3D = 4π/15
        let m3 = ball_integral(&Coord(3, 2), 0.0, &[0.0; 3], 1.0, &square).unwrap();
        assert!((m3 - 4.0 * PI / 15.0).abs() < 1e-12);
    }

    #[test]
    fn cylinder_volume_and_sphere_area() {
        let q = cylinder_integral(&One(1), &[0.0], 4.0, 0.0, None, &square).unwrap();
        assert!((q - 128.0).abs() < 1e-10);
        let s2 = sphere_integral(&One(2), 0.0, &[0.0, 0.0], 1.0, &square);
        assert!((s2 - 2.0 * PI).abs() < 1e-12);
        let s3 = sphere_integral(&One(3), 0.0, &[0.0; 3], 2.0, &square);
        assert!((s3 - 16.0 * PI).abs() < 1e-11);
    }

    #[test]
    fn exact_rule_matches_generic_rule() {
        for dim in 1..=3 {
            for axis in 0..dim {
                let f = Coord(dim, axis);
                let c = [0.1, -0.2, 0.05];
                let generic = ball_integral(&f, 0.0, &c[..dim], 0.7, &|j| j.value.powi(4)).unwrap();
                let exact = ball_integral_of_degree(&f, 0.0, &c[..dim], 0.7, &|j| j.value.powi(4), Some(4)).unwrap();
                assert!((generic - exact).abs() < 1e-12 * generic.abs().max(1.0), "{dim} {axis}: {generic} {exact}");
            }
        }
    }
}
