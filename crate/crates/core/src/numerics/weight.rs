use std::f64::consts::PI;

use statrs::function::erf::erfc;

use super::grid::MAX_DIM;
use crate::error::{ErrorKind, Result};

/// The unnormalized Gauss kernel `G_a(x,t) = (t+a)^{-n/2} exp(-|x-y|^2 / 4(t+a))`.
///
/// Total mass is `(4π)^{n/2}` for every `t + a > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWeight {
    dim: usize,
    center: [f64; MAX_DIM],
    offset: f64,
}

impl GaussianWeight {
    pub fn new(dim: usize, offset: f64) -> Result<Self> {
        Self::centered(dim, &[0.0; MAX_DIM][..dim], offset)
    }

    pub fn centered(dim: usize, center: &[f64], offset: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM || center.len() != dim {
            return Err(ErrorKind::DimensionMismatch { expected: dim, found: center.len() }
                .at("numerics", "gaussian_weight"));
        }
        if !offset.is_finite() {
            return Err(ErrorKind::Domain("offset must be finite".into()).at("numerics", "gaussian_weight"));
        }
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(center);
        Ok(Self { dim, center: c, offset })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Effective variance parameter `s = t + a`.
    pub fn scale(&self, t: f64) -> f64 {
        t + self.offset
    }

    pub fn dist_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.center()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.log_eval(x, t).exp()
    }

    pub fn log_eval(&self, x: &[f64], t: f64) -> f64 {
        let s = self.scale(t);
        -0.5 * self.dim as f64 * s.ln() - self.dist_sq(x) / (4.0 * s)
    }

    /// Exact total mass `(4π)^{n/2}`.
    pub fn mass(&self) -> f64 {
        (4.0 * PI).powf(self.dim as f64 / 2.0)
    }
}

/// Fraction of the kernel's mass outside the ball of radius `2 rho sqrt(s)`.
pub fn tail_fraction(rho: f64, dim: usize) -> f64 {
    if rho <= 0.0 {
        return 1.0;
    }
    match dim {
        1 => erfc(rho),
        2 => (-rho * rho).exp(),
        _ => erfc(rho) + 2.0 * rho * (-rho * rho).exp() / PI.sqrt(),
    }
}

/// Radius `R` such that the kernel with `s = t + a` keeps at most a `tol`
/// fraction of its mass outside `B_R`.
pub fn effective_radius(a: f64, t: f64, tol: f64, dim: usize) -> f64 {
    let s = a + t;
    if tol >= 1.0 || s <= 0.0 {
        return 0.0;
    }
    let tol = tol.max(1e-300);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while tail_fraction(hi, dim) > tol {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_fraction(mid, dim) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    2.0 * hi * s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_radius_one_dimension() {
        // erfc(R/2) = 1e-6
        let r = effective_radius(1.0, 0.0, 1e-6, 1);
        assert!((r - 6.917821474559).abs() < 1e-8, "{r}");
        assert!((erfc(r / 2.0) - 1e-6).abs() < 1e-12);
        assert_eq!(effective_radius(0.5, 0.5, 1.0, 1), 0.0);
    }

    #[test]
    fn effective_radius_scales_with_sqrt_s() {
        for dim in 1..=3 {
            let r1 = effective_radius(1.0, 0.0, 1e-8, dim);
            let r4 = effective_radius(3.0, 1.0, 1e-8, dim);
            assert!((r4 / r1 - 2.0).abs() < 1e-12);
            assert!(effective_radius(1.0, 0.0, 1e-10, dim) >= r1);
        }
    }

    #[test]
    fn weight_is_positive_and_symmetric() {
        let w = GaussianWeight::centered(2, &[0.5, -0.25], 0.3).unwrap();
        let a = w.eval(&[1.5, -0.25], 0.2);
        let b = w.eval(&[-0.5, -0.25], 0.2);
        assert!(a > 0.0 && (a - b).abs() < 1e-15);
        assert!((w.eval(&[0.5, -0.25], 0.7) - 1.0).abs() < 1e-15);
    }
}
