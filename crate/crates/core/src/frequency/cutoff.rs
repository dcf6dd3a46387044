use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numerics::field::{Jet, SpaceTimeField};
use crate::numerics::grid::MAX_DIM;

/// Radial transition of a cutoff: 1 inside `inner`, 0 outside `outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub inner: f64,
    pub outer: f64,
}

impl CutoffProfile {
    /// `ψ`: 1 on `B_3`, 0 outside `B_{7/2}`.
    pub const PSI: CutoffProfile = CutoffProfile { inner: 3.0, outer: 3.5 };
    /// `φ`: 1 on `B_{3/2}`, 0 outside `B_2`.
    pub const PHI: CutoffProfile = CutoffProfile { inner: 1.5, outer: 2.0 };

    /// `(ψ, dψ/dr, d²ψ/dr²)` at radius `r`.
    pub fn radial(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.inner {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.outer {
            return (0.0, 0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let z = (r - self.inner) / w;
        let q = 1.0 - z * z;
        let psi = (1.0 - 1.0 / q).exp();
        let g = -2.0 * z / (q * q);
        let d1 = psi * g;
        let d2 = psi * (g * g - 2.0 / (q * q) - 8.0 * z * z / (q * q * q));
        (psi, d1 / w, d2 / (w * w))
    }
}

/// `f = u ψ(|x|)` with product-rule derivatives.
#[derive(Clone)]
pub struct CutoffField {
    base: Arc<dyn SpaceTimeField>,
    profile: CutoffProfile,
}

impl CutoffField {
    pub fn new(base: Arc<dyn SpaceTimeField>, profile: CutoffProfile) -> Self {
        Self { base, profile }
    }

    pub fn psi(base: Arc<dyn SpaceTimeField>) -> Self {
        Self::new(base, CutoffProfile::PSI)
    }

    pub fn phi(base: Arc<dyn SpaceTimeField>) -> Self {
        Self::new(base, CutoffProfile::PHI)
    }

    pub fn profile(&self) -> CutoffProfile {
        self.profile
    }

    pub fn base(&self) -> &Arc<dyn SpaceTimeField> {
        &self.base
    }
}

impl SpaceTimeField for CutoffField {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        let n = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= self.profile.outer {
            return Jet::ZERO;
        }
        let u = self.base.jet(x, t);
        if r <= self.profile.inner {
            return u;
        }
        let (psi, dr, drr) = self.profile.radial(r);
        let mut grad_psi = [0.0; MAX_DIM];
        for d in 0..n {
            grad_psi[d] = dr * x[d] / r;
        }
        let lap_psi = drr + (n as f64 - 1.0) / r * dr;
        let mut gradient = [0.0; MAX_DIM];
        let mut cross = 0.0;
        for d in 0..n {
            gradient[d] = psi * u.gradient[d] + u.value * grad_psi[d];
            cross += u.gradient[d] * grad_psi[d];
        }
        Jet {
            value: u.value * psi,
            gradient,
            laplacian: psi * u.laplacian + 2.0 * cross + u.value * lap_psi,
            time_derivative: psi * u.time_derivative,
        }
    }

    fn is_analytic(&self) -> bool {
        self.base.is_analytic()
    }

    fn feature_scale(&self) -> f64 {
        self.base.feature_scale().min((self.profile.outer - self.profile.inner) / 8.0)
    }

    fn support_half_width(&self) -> Option<f64> {
        Some(self.profile.outer)
    }

    fn time_domain(&self) -> (f64, f64) {
        self.base.time_domain()
    }

    fn time_scale(&self) -> f64 {
        self.base.time_scale()
    }

    fn label(&self) -> String {
        format!("{}*cutoff[{},{}]", self.base.label(), self.profile.inner, self.profile.outer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_derivatives_match_differences() {
        let p = CutoffProfile::PSI;
        let h = 1e-5;
        for &r in &[3.05, 3.2, 3.31, 3.45] {
            let (v, d1, d2) = p.radial(r);
            let (vp, d1p, _) = p.radial(r + h);
            let (vm, d1m, _) = p.radial(r - h);
            assert!(v > 0.0 && v < 1.0);
            assert!(((vp - vm) / (2.0 * h) - d1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!(((d1p - d1m) / (2.0 * h) - d2).abs() < 1e-5 * (1.0 + d2.abs()));
        }
        assert_eq!(p.radial(3.0), (1.0, 0.0, 0.0));
        assert_eq!(p.radial(3.5), (0.0, 0.0, 0.0));
    }

    struct One;
    impl SpaceTimeField for One {
        fn dim(&self) -> usize {
            2
        }
        fn jet(&self, _x: &[f64], _t: f64) -> Jet {
            Jet { value: 1.0, ..Jet::ZERO }
        }
        fn label(&self) -> String {
            "1".into()
        }
    }

    #[test]
    fn laplacian_of_cutoff_matches_differences() {
        let f = CutoffField::phi(Arc::new(One));
        let x = [1.2, 1.0];
        let h = 1e-4;
        let c = f.value(&x, 0.0);
        let mut lap = 0.0;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            lap += (f.value(&xp, 0.0) - 2.0 * c + f.value(&xm, 0.0)) / (h * h);
        }
        assert!((lap - f.jet(&x, 0.0).laplacian).abs() < 1e-5);
        assert_eq!(f.value(&[0.5, 0.5], 0.0), 1.0);
        assert_eq!(f.value(&[2.0, 0.1], 0.0), 0.0);
    }
}
