use std::fmt;
use std::sync::Arc;

use super::grid::{SpaceTimeGrid, MAX_DIM};
use crate::error::{ErrorKind, Result};

/// Value and derivatives of a field at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub gradient: [f64; MAX_DIM],
    pub laplacian: f64,
    pub time_derivative: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet { value: 0.0, gradient: [0.0; MAX_DIM], laplacian: 0.0, time_derivative: 0.0 };

    pub fn grad_norm_sq(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum()
    }

    /// `Δf + ∂_t f`, the backward heat operator applied to the field.
    pub fn backward_heat(&self) -> f64 {
        self.laplacian + self.time_derivative
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|g| g.is_finite())
            && self.laplacian.is_finite()
            && self.time_derivative.is_finite()
    }

    pub fn scaled(&self, c: f64) -> Jet {
        Jet {
            value: c * self.value,
            gradient: self.gradient.map(|g| c * g),
            laplacian: c * self.laplacian,
            time_derivative: c * self.time_derivative,
        }
    }

    fn nan() -> Jet {
        Jet { value: f64::NAN, gradient: [f64::NAN; MAX_DIM], laplacian: f64::NAN, time_derivative: f64::NAN }
    }
}

/// A real function of `(x, t)` with value, gradient, Laplacian and time
/// derivative available at arbitrary points.
pub trait SpaceTimeField: Send + Sync {
    fn dim(&self) -> usize;

    fn jet(&self, x: &[f64], t: f64) -> Jet;

    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.jet(x, t).value
    }

    /// True when derivatives come from closed forms rather than a discrete
    /// interpolant.
    fn is_analytic(&self) -> bool {
        true
    }

    /// Length scale below which the field has structure; quadrature lattices
    /// never use a coarser spacing than this.
    fn feature_scale(&self) -> f64 {
        f64::INFINITY
    }

    /// Half-width of a cube about the origin outside of which the field vanishes.
    fn support_half_width(&self) -> Option<f64> {
        None
    }

    /// Closed time interval on which the field is defined.
    fn time_domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Time step of the underlying samples, infinite for closed forms.
    fn time_scale(&self) -> f64 {
        f64::INFINITY
    }

    /// Total degree in `x` when every time slice is a polynomial.
    fn polynomial_degree(&self) -> Option<u32> {
        None
    }

    fn label(&self) -> String;
}

impl<T: SpaceTimeField + ?Sized> SpaceTimeField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn jet(&self, x: &[f64], t: f64) -> Jet {
        (**self).jet(x, t)
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        (**self).value(x, t)
    }
    fn is_analytic(&self) -> bool {
        (**self).is_analytic()
    }
    fn feature_scale(&self) -> f64 {
        (**self).feature_scale()
    }
    fn support_half_width(&self) -> Option<f64> {
        (**self).support_half_width()
    }
    fn time_domain(&self) -> (f64, f64) {
        (**self).time_domain()
    }
    fn time_scale(&self) -> f64 {
        (**self).time_scale()
    }
    fn polynomial_degree(&self) -> Option<u32> {
        (**self).polynomial_degree()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// Where a [`ScalarField`]'s derivatives come from.
#[derive(Clone)]
pub enum DerivativeSource {
    Analytic(Arc<dyn SpaceTimeField>),
    FiniteDifference,
}

impl fmt::Debug for DerivativeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivativeSource::Analytic(src) => write!(f, "Analytic({})", src.label()),
            DerivativeSource::FiniteDifference => write!(f, "FiniteDifference"),
        }
    }
}

/// Space-time samples on a [`SpaceTimeGrid`].
///
/// Values are stored time-level major, spatial nodes row-major. Off-node
/// evaluation of a finite-difference field uses tensor-product cubic Lagrange
/// interpolation in space and time; outside the spatial box the field is zero.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: SpaceTimeGrid,
    values: Arc<Vec<f64>>,
    source: DerivativeSource,
    label: String,
}

impl ScalarField {
    pub fn from_values(grid: SpaceTimeGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let expected = grid.space_nodes() * grid.time_levels();
        if values.len() != expected {
            return Err(ErrorKind::InvalidGrid(format!("expected {expected} values, got {}", values.len()))
                .at("numerics", "scalar_field"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ErrorKind::NonFinite.at("numerics", "scalar_field"));
        }
        if grid.nodes_per_axis() < 4 {
            return Err(ErrorKind::InvalidGrid("need at least 4 nodes per axis".into()).at("numerics", "scalar_field"));
        }
        Ok(Self { grid, values: Arc::new(values), source: DerivativeSource::FiniteDifference, label: label.into() })
    }

    /// Samples an analytic field at every grid node; derivatives keep using
    /// the closed forms.
    pub fn sample_analytic(source: Arc<dyn SpaceTimeField>, grid: SpaceTimeGrid) -> Result<Self> {
        if source.dim() != grid.dim() {
            return Err(ErrorKind::DimensionMismatch { expected: grid.dim(), found: source.dim() }
                .at("oracles", "sample"));
        }
        let nodes = grid.space_nodes();
        let mut values = Vec::with_capacity(nodes * grid.time_levels());
        let mut x = [0.0; MAX_DIM];
        for level in 0..grid.time_levels() {
            let t = grid.time(level);
            for flat in 0..nodes {
                grid.node_point(flat, &mut x);
                values.push(source.value(&x[..grid.dim()], t));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ErrorKind::NonFinite.at("oracles", "sample"));
        }
        let label = source.label();
        Ok(Self { grid, values: Arc::new(values), source: DerivativeSource::Analytic(source), label })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> &DerivativeSource {
        &self.source
    }

    pub fn slice(&self, level: usize) -> &[f64] {
        let n = self.grid.space_nodes();
        &self.values[level * n..(level + 1) * n]
    }

    pub fn node_value(&self, level: usize, flat: usize) -> f64 {
        self.values[level * self.grid.space_nodes() + flat]
    }

    fn interpolate(&self, x: &[f64], t: f64) -> Jet {
        let g = &self.grid;
        let n = g.dim();
        let (t0, t1) = (0.0, g.horizon());
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            return Jet::nan();
        }
        if x.iter().any(|xi| xi.abs() > g.half_width()) {
            return Jet::ZERO;
        }
        let h = g.spacing();
        let m = g.nodes_per_axis();
        let mut start = [0usize; MAX_DIM];
        let mut w = [[[0.0; 4]; 3]; MAX_DIM];
        for d in 0..n {
            let xi = (x[d] + g.half_width()) / h;
            let i0 = (xi.floor() as isize - 1).clamp(0, m as isize - 4) as usize;
            start[d] = i0;
            w[d] = lagrange_weights(4, xi - i0 as f64);
        }
        let levels = g.time_levels();
        let k = levels.min(4);
        let tau = t / g.time_step();
        let j0 = (tau.floor() as isize - 1).clamp(0, (levels - k) as isize) as usize;
        let wt = lagrange_weights(k, tau - j0 as f64);

        let mut jet = Jet::ZERO;
        let stencil = 4usize.pow(n as u32);
        let nodes = g.space_nodes();
        for s in 0..stencil {
            let mut rem = s;
            let mut offs = [0usize; MAX_DIM];
            for d in (0..n).rev() {
                offs[d] = rem % 4;
                rem /= 4;
            }
            let mut flat = 0;
            for d in 0..n {
                flat = flat * m + start[d] + offs[d];
            }
            let mut val_t = 0.0;
            let mut dval_t = 0.0;
            for (q, (wv, wd)) in wt[0].iter().zip(wt[1].iter()).take(k).enumerate() {
                let v = self.values[(j0 + q) * nodes + flat];
                val_t += wv * v;
                dval_t += wd * v;
            }
            let mut base = 1.0;
            for d in 0..n {
                base *= w[d][0][offs[d]];
            }
            jet.value += base * val_t;
            jet.time_derivative += base * dval_t / g.time_step();
            for d in 0..n {
                let mut gd = 1.0;
                let mut ld = 1.0;
                for e in 0..n {
                    let o = offs[e];
                    if e == d {
                        gd *= w[e][1][o];
                        ld *= w[e][2][o];
                    } else {
                        gd *= w[e][0][o];
                        ld *= w[e][0][o];
                    }
                }
                jet.gradient[d] += gd * val_t / h;
                jet.laplacian += ld * val_t / (h * h);
            }
        }
        jet
    }
}

impl SpaceTimeField for ScalarField {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        match &self.source {
            DerivativeSource::Analytic(src) => src.jet(x, t),
            DerivativeSource::FiniteDifference => self.interpolate(x, t),
        }
    }

    fn is_analytic(&self) -> bool {
        matches!(self.source, DerivativeSource::Analytic(_))
    }

    fn feature_scale(&self) -> f64 {
        match &self.source {
            DerivativeSource::Analytic(src) => src.feature_scale(),
            DerivativeSource::FiniteDifference => self.grid.spacing() / 2.0,
        }
    }

    fn support_half_width(&self) -> Option<f64> {
        match &self.source {
            DerivativeSource::Analytic(src) => src.support_half_width(),
            DerivativeSource::FiniteDifference => Some(self.grid.half_width()),
        }
    }

    fn time_domain(&self) -> (f64, f64) {
        match &self.source {
            DerivativeSource::Analytic(src) => src.time_domain(),
            DerivativeSource::FiniteDifference => (0.0, self.grid.horizon()),
        }
    }

    fn time_scale(&self) -> f64 {
        match &self.source {
            DerivativeSource::Analytic(src) => src.time_scale(),
            DerivativeSource::FiniteDifference => self.grid.time_step(),
        }
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Lagrange basis weights (value, first and second derivative with respect
/// to `u`) on the equispaced nodes `0, 1, .., k-1`.
pub(crate) fn lagrange_weights(k: usize, u: f64) -> [[f64; 4]; 3] {
    let mut out = [[0.0; 4]; 3];
    for i in 0..k {
        let mut den = 1.0;
        for m in 0..k {
            if m != i {
                den *= i as f64 - m as f64;
            }
        }
        let mut val = 1.0;
        for m in 0..k {
            if m != i {
                val *= u - m as f64;
            }
        }
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for j in 0..k {
            if j == i {
                continue;
            }
            let mut p = 1.0;
            for m in 0..k {
                if m != i && m != j {
                    p *= u - m as f64;
                }
            }
            d1 += p;
            for l in 0..k {
                if l == i || l == j {
                    continue;
                }
                let mut q = 1.0;
                for m in 0..k {
                    if m != i && m != j && m != l {
                        q *= u - m as f64;
                    }
                }
                d2 += q;
            }
        }
        out[0][i] = val / den;
        out[1][i] = d1 / den;
        out[2][i] = d2 / den;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Cubic;
    impl SpaceTimeField for Cubic {
        fn dim(&self) -> usize {
            2
        }
        fn jet(&self, x: &[f64], t: f64) -> Jet {
            // x^3 y + t^2
            Jet {
                value: x[0].powi(3) * x[1] + t * t,
                gradient: [3.0 * x[0] * x[0] * x[1], x[0].powi(3), 0.0],
                laplacian: 6.0 * x[0] * x[1],
                time_derivative: 2.0 * t,
            }
        }
        fn label(&self) -> String {
            "cubic".into()
        }
    }

    #[test]
    fn lagrange_partition_of_unity() {
        for &u in &[0.0, 0.3, 1.5, 2.7] {
            let w = lagrange_weights(4, u);
            assert!((w[0].iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(w[1].iter().sum::<f64>().abs() < 1e-13);
            assert!(w[2].iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_interpolant_reproduces_cubics() {
        let grid = SpaceTimeGrid::new(2, 2.0, 0.25, 1.0, 0.125).unwrap();
        let exact = Arc::new(Cubic);
        let sampled = ScalarField::sample_analytic(exact.clone(), grid).unwrap();
        let fd = ScalarField::from_values(grid, sampled.values().to_vec(), "fd").unwrap();
        assert!(!fd.is_analytic());
        let p = [0.37, -1.11];
        let (a, b) = (exact.jet(&p, 0.41), fd.jet(&p, 0.41));
        assert!((a.value - b.value).abs() < 1e-12);
        assert!((a.gradient[0] - b.gradient[0]).abs() < 1e-11);
        assert!((a.gradient[1] - b.gradient[1]).abs() < 1e-11);
        assert!((a.laplacian - b.laplacian).abs() < 1e-9);
        assert!((a.time_derivative - b.time_derivative).abs() < 1e-10);
        assert_eq!(fd.jet(&[2.5, 0.0], 0.5), Jet::ZERO);
        assert!(fd.jet(&[0.0, 0.0], 1.5).value.is_nan());
    }

    #[test]
    fn rejects_non_finite_values() {
        let grid = SpaceTimeGrid::new(1, 1.0, 0.25, 1.0, 0.5).unwrap();
        let mut v = vec![0.0; grid.space_nodes() * grid.time_levels()];
        v[3] = f64::NAN;
        assert!(ScalarField::from_values(grid, v, "bad").is_err());
    }
}
