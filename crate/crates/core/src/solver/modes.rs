use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ErrorKind, Result};
use crate::numerics::field::{Jet, SpaceTimeField};
use crate::numerics::grid::MAX_DIM;

/// Time-independent data `Σ_m c_m φ_m(x_1) Π_{d>1} φ_1(x_d)` built from the
/// Dirichlet eigenfunctions `φ_m(s) = sin(mπ(s + L)/2L)` of `[-L, L]`, so it
/// vanishes on the boundary of the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletModes {
    pub dim: usize,
    pub half_width: f64,
    pub amplitudes: Vec<f64>,
}

impl DirichletModes {
    pub fn new(dim: usize, half_width: f64, amplitudes: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM || !(half_width > 0.0) || amplitudes.is_empty() {
            return Err(ErrorKind::Precondition("need 1 ≤ n ≤ 3, L > 0 and at least one mode".into())
                .at("solver", "dirichlet_modes"));
        }
        Ok(Self { dim, half_width, amplitudes })
    }

    fn mode(&self, m: usize, s: f64) -> (f64, f64, f64) {
        let k = m as f64 * PI / (2.0 * self.half_width);
        let arg = k * (s + self.half_width);
        (arg.sin(), k * arg.cos(), -k * k * arg.sin())
    }
}

impl SpaceTimeField for DirichletModes {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, x: &[f64], _t: f64) -> Jet {
        let (mut f, mut df, mut d2f) = (0.0, 0.0, 0.0);
        for (j, c) in self.amplitudes.iter().enumerate() {
            let (v, d, dd) = self.mode(j + 1, x[0]);
            f += c * v;
            df += c * d;
            d2f += c * dd;
        }
        let rest: Vec<(f64, f64, f64)> = x[1..self.dim].iter().map(|&s| self.mode(1, s)).collect();
        let product = |skip: Option<usize>, second: bool| -> f64 {
            rest.iter()
                .enumerate()
                .map(|(i, &(v, d, dd))| if Some(i) == skip { if second { dd } else { d } } else { v })
                .product()
        };
        let p = product(None, false);
        let mut jet = Jet { value: f * p, ..Jet::ZERO };
        jet.gradient[0] = df * p;
        jet.laplacian = d2f * p;
        for i in 0..rest.len() {
            jet.gradient[i + 1] = f * product(Some(i), false);
            jet.laplacian += f * product(Some(i), true);
        }
        jet
    }

    fn support_half_width(&self) -> Option<f64> {
        Some(self.half_width)
    }

    fn label(&self) -> String {
        format!("dirichlet_modes{:?}", self.amplitudes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_on_the_box_and_matches_fd() {
        let m = DirichletModes::new(2, 6.0, vec![1.0, -0.5]).unwrap();
        assert!(m.value(&[6.0, 1.0], 0.0).abs() < 1e-14);
        assert!(m.value(&[0.3, -6.0], 0.0).abs() < 1e-14);
        let x = [0.7, -1.3];
        let j = m.jet(&x, 0.0);
        let h = 1e-4;
        let mut lap = 0.0;
        for d in 0..2 {
            let mut p = x;
            let mut q = x;
            p[d] += h;
            q[d] -= h;
            let (fp, fq) = (m.value(&p, 0.0), m.value(&q, 0.0));
            assert!(((fp - fq) / (2.0 * h) - j.gradient[d]).abs() < 1e-7);
            lap += (fp - 2.0 * j.value + fq) / (h * h);
        }
        assert!((lap - j.laplacian).abs() < 1e-5);
    }

    #[test]
    fn first_two_modes_in_one_dimension() {
        let m = DirichletModes::new(1, 6.0, vec![1.0, -0.5]).unwrap();
        let x = 1.1;
        let expected = (PI * x / 12.0).cos() + 0.5 * (PI * x / 6.0).sin();
        assert!((m.value(&[x], 0.0) - expected).abs() < 1e-14);
    }
}
