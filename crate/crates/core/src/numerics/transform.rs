use std::sync::Arc;

use super::field::{Jet, SpaceTimeField};
use super::grid::MAX_DIM;

/// `f(x - z, t - τ)`: the field moved so that its origin sits at `(z, τ)`.
#[derive(Clone)]
pub struct Translated {
    inner: Arc<dyn SpaceTimeField>,
    shift: [f64; MAX_DIM],
    time_shift: f64,
}

impl Translated {
    pub fn new(inner: Arc<dyn SpaceTimeField>, shift: &[f64], time_shift: f64) -> Self {
        let mut s = [0.0; MAX_DIM];
        s[..shift.len()].copy_from_slice(shift);
        Self { inner, shift: s, time_shift }
    }
}

impl SpaceTimeField for Translated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        let mut y = [0.0; MAX_DIM];
        for (d, yd) in y.iter_mut().enumerate().take(x.len()) {
            *yd = x[d] - self.shift[d];
        }
        self.inner.jet(&y[..x.len()], t - self.time_shift)
    }

    fn is_analytic(&self) -> bool {
        self.inner.is_analytic()
    }

    fn feature_scale(&self) -> f64 {
        self.inner.feature_scale()
    }

    fn support_half_width(&self) -> Option<f64> {
        let shift = self.shift.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        self.inner.support_half_width().map(|l| l + shift)
    }

    fn time_domain(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.time_domain();
        (lo + self.time_shift, hi + self.time_shift)
    }

    fn time_scale(&self) -> f64 {
        self.inner.time_scale()
    }

    fn polynomial_degree(&self) -> Option<u32> {
        self.inner.polynomial_degree()
    }

    fn label(&self) -> String {
        format!("{}(x-{:?}, t-{})", self.inner.label(), &self.shift[..self.dim()], self.time_shift)
    }
}

/// Parabolic rescaling `f(λx, λ²t)`.
#[derive(Clone)]
pub struct Rescaled {
    inner: Arc<dyn SpaceTimeField>,
    lambda: f64,
}

impl Rescaled {
    pub fn new(inner: Arc<dyn SpaceTimeField>, lambda: f64) -> Self {
        Self { inner, lambda }
    }
}

impl SpaceTimeField for Rescaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        let l = self.lambda;
        let mut y = [0.0; MAX_DIM];
        for (d, yd) in y.iter_mut().enumerate().take(x.len()) {
            *yd = l * x[d];
        }
        let j = self.inner.jet(&y[..x.len()], l * l * t);
        Jet {
            value: j.value,
            gradient: j.gradient.map(|g| l * g),
            laplacian: l * l * j.laplacian,
            time_derivative: l * l * j.time_derivative,
        }
    }

    fn is_analytic(&self) -> bool {
        self.inner.is_analytic()
    }

    fn feature_scale(&self) -> f64 {
        self.inner.feature_scale() / self.lambda
    }

    fn support_half_width(&self) -> Option<f64> {
        self.inner.support_half_width().map(|l| l / self.lambda)
    }

    fn time_domain(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.time_domain();
        let l2 = self.lambda * self.lambda;
        (lo / l2, hi / l2)
    }

    fn time_scale(&self) -> f64 {
        self.inner.time_scale() / (self.lambda * self.lambda)
    }

    fn polynomial_degree(&self) -> Option<u32> {
        self.inner.polynomial_degree()
    }

    fn label(&self) -> String {
        format!("{}({}x, {}t)", self.inner.label(), self.lambda, self.lambda * self.lambda)
    }
}
