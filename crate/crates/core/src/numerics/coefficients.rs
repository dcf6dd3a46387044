use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{SpaceTimeGrid, MAX_DIM};
use crate::error::{ErrorKind, Result};

pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];

/// Closed-form coefficient models.
///
/// `Perturbed` is `g = (1 + ε s) I + ε_off s (J - I)` with
/// `s = sin(k Σ x_i + ω t)`, so `g(0, 0) = I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientModel {
    Identity,
    Perturbed {
        epsilon: f64,
        #[serde(default)]
        off_diagonal: f64,
        wavenumber: f64,
        frequency: f64,
    },
}

impl CoefficientModel {
    pub fn eval(&self, dim: usize, x: &[f64], t: f64) -> Matrix {
        let mut g = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in g.iter_mut().enumerate().take(dim) {
            row[i] = 1.0;
        }
        if let CoefficientModel::Perturbed { epsilon, off_diagonal, wavenumber, frequency } = *self {
            let s = (wavenumber * x[..dim].iter().sum::<f64>() + frequency * t).sin();
            for i in 0..dim {
                for j in 0..dim {
                    g[i][j] += if i == j { epsilon * s } else { off_diagonal * s };
                }
            }
        }
        g
    }

    /// Largest sampled parabolic-Lipschitz quotient the model can produce on
    /// grids with `Δt ≤ 1`.
    pub fn lipschitz_bound(&self, dim: usize) -> f64 {
        match *self {
            CoefficientModel::Identity => 0.0,
            CoefficientModel::Perturbed { epsilon, off_diagonal, wavenumber, frequency } => {
                let amplitude = dim as f64 * epsilon.abs() + (dim * dim - dim) as f64 * off_diagonal.abs();
                amplitude * (wavenumber.abs() + frequency.abs())
            }
        }
    }

    /// Ellipticity constant implied by the eigenvalue range of the model.
    pub fn ellipticity_bound(&self, dim: usize) -> f64 {
        match *self {
            CoefficientModel::Identity => 1.0,
            CoefficientModel::Perturbed { epsilon, off_diagonal, .. } => {
                let spread = epsilon.abs() + (dim as f64 - 1.0) * off_diagonal.abs();
                (1.0 - spread).min(1.0 / (1.0 + spread))
            }
        }
    }
}

/// Symmetric matrix field `g^{ij}(x, t)` on a grid, with declared ellipticity
/// `λ` and parabolic Lipschitz constant `M`, both verified at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    grid: SpaceTimeGrid,
    model: CoefficientModel,
    ellipticity: f64,
    lipschitz: f64,
}

/// Outcome of the node-by-node hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientAudit {
    pub min_quadratic_form: f64,
    pub max_quadratic_form: f64,
    pub max_asymmetry: f64,
    pub max_lipschitz_quotient: f64,
}

impl CoefficientField {
    pub fn identity(grid: SpaceTimeGrid) -> Self {
        Self { grid, model: CoefficientModel::Identity, ellipticity: 1.0, lipschitz: 0.0 }
    }

    /// Builds and audits the field; fails when the declared `λ` or `M` is
    /// violated at any node.
    pub fn new(grid: SpaceTimeGrid, model: CoefficientModel, ellipticity: f64, lipschitz: f64) -> Result<Self> {
        if !(ellipticity > 0.0 && ellipticity <= 1.0) || !(lipschitz >= 0.0) {
            return Err(ErrorKind::Coefficients(format!("λ = {ellipticity} must lie in (0, 1] and M = {lipschitz} ≥ 0"))
                .at("numerics", "coefficient_field"));
        }
        let field = Self { grid, model, ellipticity, lipschitz };
        let audit = field.audit();
        let tol = 1e-12;
        if audit.max_asymmetry > 0.0 {
            return Err(ErrorKind::Coefficients("matrix not symmetric".into()).at("numerics", "coefficient_field"));
        }
        if audit.min_quadratic_form < ellipticity - tol || audit.max_quadratic_form > 1.0 / ellipticity + tol {
            return Err(ErrorKind::Coefficients(format!(
                "quadratic form range [{}, {}] outside [{ellipticity}, {}]",
                audit.min_quadratic_form,
                audit.max_quadratic_form,
                1.0 / ellipticity
            ))
            .at("numerics", "coefficient_field"));
        }
        if audit.max_lipschitz_quotient > lipschitz + tol {
            return Err(ErrorKind::Coefficients(format!(
                "sampled Lipschitz quotient {} exceeds M = {lipschitz}",
                audit.max_lipschitz_quotient
            ))
            .at("numerics", "coefficient_field"));
        }
        Ok(field)
    }

    /// Perturbed model with the Lipschitz constant taken from its closed-form bound.
    pub fn perturbed(grid: SpaceTimeGrid, model: CoefficientModel, ellipticity: f64) -> Result<Self> {
        let m = model.lipschitz_bound(grid.dim());
        Self::new(grid, model, ellipticity, m)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }
    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Matrix {
        self.model.eval(self.grid.dim(), x, t)
    }

    pub fn is_time_independent(&self) -> bool {
        match self.model {
            CoefficientModel::Identity => true,
            CoefficientModel::Perturbed { frequency, .. } => frequency == 0.0,
        }
    }

    /// True when `g(0, 0)` is the identity to rounding.
    pub fn is_identity_at_origin(&self) -> bool {
        let n = self.grid.dim();
        let g = self.eval(&[0.0; MAX_DIM][..n], 0.0);
        (0..n).all(|i| (0..n).all(|j| (g[i][j] - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-14))
    }

    /// Checks symmetry, the quadratic form on probe directions, and the
    /// parabolic-Lipschitz quotient over adjacent node pairs, at every node.
    pub fn audit(&self) -> CoefficientAudit {
        let n = self.grid.dim();
        let probes = probe_directions(n);
        let levels = self.grid.time_levels();
        let nodes = self.grid.space_nodes();
        let h = self.grid.spacing();
        let dt = self.grid.time_step();
        let partials: Vec<CoefficientAudit> = (0..levels)
            .into_par_iter()
            .map(|level| {
                let t = self.grid.time(level);
                let mut a = CoefficientAudit {
                    min_quadratic_form: f64::INFINITY,
                    max_quadratic_form: f64::NEG_INFINITY,
                    max_asymmetry: 0.0,
                    max_lipschitz_quotient: 0.0,
                };
                let mut x = [0.0; MAX_DIM];
                let mut idx = [0usize; MAX_DIM];
                for flat in 0..nodes {
                    self.grid.node_point(flat, &mut x[..n]);
                    self.grid.multi_index(flat, &mut idx[..n]);
                    let g = self.eval(&x[..n], t);
                    for i in 0..n {
                        for j in 0..i {
                            a.max_asymmetry = a.max_asymmetry.max((g[i][j] - g[j][i]).abs());
                        }
                    }
                    for xi in &probes {
                        let q = quadratic_form(&g, xi, n);
                        a.min_quadratic_form = a.min_quadratic_form.min(q);
                        a.max_quadratic_form = a.max_quadratic_form.max(q);
                    }
                    for d in 0..n {
                        if idx[d] + 1 < self.grid.nodes_per_axis() {
                            let mut y = x;
                            y[d] += h;
                            let q = entry_distance(&g, &self.eval(&y[..n], t), n) / h;
                            a.max_lipschitz_quotient = a.max_lipschitz_quotient.max(q);
                        }
                    }
                    if level + 1 < levels {
                        let q = entry_distance(&g, &self.eval(&x[..n], t + dt), n) / dt.sqrt();
                        a.max_lipschitz_quotient = a.max_lipschitz_quotient.max(q);
                    }
                }
                a
            })
            .collect();
        partials.into_iter().fold(
            CoefficientAudit {
                min_quadratic_form: f64::INFINITY,
                max_quadratic_form: f64::NEG_INFINITY,
                max_asymmetry: 0.0,
                max_lipschitz_quotient: 0.0,
            },
            |acc, p| CoefficientAudit {
                min_quadratic_form: acc.min_quadratic_form.min(p.min_quadratic_form),
                max_quadratic_form: acc.max_quadratic_form.max(p.max_quadratic_form),
                max_asymmetry: acc.max_asymmetry.max(p.max_asymmetry),
                max_lipschitz_quotient: acc.max_lipschitz_quotient.max(p.max_lipschitz_quotient),
            },
        )
    }
}

fn quadratic_form(g: &Matrix, xi: &[f64; MAX_DIM], n: usize) -> f64 {
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += g[i][j] * xi[i] * xi[j];
        }
    }
    q
}

fn entry_distance(a: &Matrix, b: &Matrix, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[i][j] - b[i][j]).abs();
        }
    }
    s
}

/// Unit coordinate axes plus all normalized `(±1, .., ±1)` diagonals.
pub fn probe_directions(n: usize) -> Vec<[f64; MAX_DIM]> {
    let mut out = Vec::new();
    for d in 0..n {
        let mut e = [0.0; MAX_DIM];
        e[d] = 1.0;
        out.push(e);
    }
    if n > 1 {
        let norm = (n as f64).sqrt();
        for mask in 0..(1usize << (n - 1)) {
            let mut e = [0.0; MAX_DIM];
            e[0] = 1.0 / norm;
            for (d, ed) in e.iter_mut().enumerate().take(n).skip(1) {
                *ed = if mask >> (d - 1) & 1 == 1 { -1.0 } else { 1.0 } / norm;
            }
            out.push(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CoefficientModel {
        CoefficientModel::Perturbed { epsilon: 0.1, off_diagonal: 0.05, wavenumber: 1.0, frequency: 1.0 }
    }

    #[test]
    fn perturbed_model_satisfies_hypotheses() {
        let grid = SpaceTimeGrid::new(2, 2.0, 0.1, 1.0, 0.05).unwrap();
        let c = CoefficientField::perturbed(grid, model(), 0.8).unwrap();
        let a = c.audit();
        assert!(a.min_quadratic_form >= 0.8 && a.max_quadratic_form <= 1.25);
        assert!(a.max_lipschitz_quotient <= c.lipschitz());
        assert!(c.is_identity_at_origin());
    }

    #[test]
    fn rejects_overclaimed_ellipticity() {
        let grid = SpaceTimeGrid::new(1, 2.0, 0.1, 1.0, 0.05).unwrap();
        assert!(CoefficientField::perturbed(grid, model(), 0.95).is_err());
        assert!(CoefficientField::new(grid, model(), 0.8, 1e-3).is_err());
    }

    #[test]
    fn probes_are_unit_vectors() {
        for n in 1..=3 {
            for p in probe_directions(n) {
                let norm: f64 = p.iter().map(|v| v * v).sum();
                assert!((norm - 1.0).abs() < 1e-15);
            }
        }
    }
}
