//! Crank–Nicolson solver for `∂_i(g^{ij}∂_j u) + b·∇u + cu ± ∂_t u = 0` on a
//! box with homogeneous Dirichlet data, and discrete fundamental solutions.

pub mod linear;
pub mod modes;

pub use modes::DirichletModes;

use serde::{Deserialize, Serialize};

use crate::error::{ErrorKind, Result};
use crate::numerics::coefficients::CoefficientField;
use crate::numerics::field::{ScalarField, SpaceTimeField};
use crate::numerics::grid::{SpaceTimeGrid, MAX_DIM};
use linear::{bicgstab, thomas};

/// Relative residual at which the iterative solver stops.
pub const ITERATIVE_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 5000;
/// Steps at the start of a run replaced by two backward-Euler half steps each.
const STARTUP_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `∂_t u = ∂_i(g^{ij}∂_j u) + b·∇u + cu` from initial data at `t = 0`.
    Forward,
    /// `∂_i(g^{ij}∂_j u) + ∂_t u + b·∇u + cu = 0` from terminal data at `t = T`.
    Backward,
}

/// Constant drift `b` and potential `c`; the solution then satisfies
/// `|Pu| ≤ M(|u| + |∇u|)` whenever `|b|, |c| ≤ M`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LowerOrder {
    #[serde(default)]
    pub drift: [f64; MAX_DIM],
    #[serde(default)]
    pub potential: f64,
}

impl LowerOrder {
    pub fn drift_norm(&self) -> f64 {
        self.drift.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSpec {
    pub coefficients: CoefficientField,
    pub direction: Direction,
    pub lower_order: LowerOrder,
    /// The `M` of the differential inequality.
    pub bound: f64,
    pub data_label: String,
    /// Initial (forward) or terminal (backward) values on the spatial nodes.
    #[serde(skip)]
    pub data: Vec<f64>,
}

impl SolveSpec {
    /// Samples `data` at `t = 0` (forward) or `t = T` (backward).
    pub fn from_field(
        coefficients: CoefficientField,
        direction: Direction,
        lower_order: LowerOrder,
        bound: f64,
        data: &dyn SpaceTimeField,
    ) -> Self {
        let grid = *coefficients.grid();
        let t = match direction {
            Direction::Forward => 0.0,
            Direction::Backward => grid.horizon(),
        };
        let n = grid.dim();
        let mut x = [0.0; MAX_DIM];
        let values = (0..grid.space_nodes())
            .map(|i| {
                grid.node_point(i, &mut x[..n]);
                data.value(&x[..n], t)
            })
            .collect();
        Self { coefficients, direction, lower_order, bound, data_label: data.label(), data: values }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.coefficients.grid()
    }

    fn validate(&self) -> Result<()> {
        let fail = |k: ErrorKind| Err(k.at("solver", "solve"));
        let grid = self.grid();
        if self.data.len() != grid.space_nodes() {
            return fail(ErrorKind::DimensionMismatch { expected: grid.space_nodes(), found: self.data.len() });
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return fail(ErrorKind::NonFinite);
        }
        if grid.nodes_per_axis() < 3 {
            return fail(ErrorKind::InvalidGrid("need an interior node".into()));
        }
        let lo = &self.lower_order;
        if lo.drift[grid.dim()..].iter().any(|&b| b != 0.0) {
            return fail(ErrorKind::Precondition("drift has components beyond the dimension".into()));
        }
        if lo.drift_norm() > self.bound + 1e-15 || lo.potential.abs() > self.bound + 1e-15 {
            return fail(ErrorKind::Precondition(format!(
                "|b| = {} or |c| = {} exceeds M = {}",
                lo.drift_norm(),
                lo.potential.abs(),
                self.bound
            )));
        }
        Ok(())
    }
}

/// Discrete `L u = ∂_i(g^{ij}∂_j u) + b·∇u + cu` at one time.
struct Operator {
    n: usize,
    h: f64,
    strides: [usize; MAX_DIM],
    interior: Vec<bool>,
    diag: Vec<[f64; MAX_DIM]>,
    /// `g^{01}, g^{02}, g^{12}`.
    off: Vec<[f64; MAX_DIM]>,
    lower: LowerOrder,
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl Operator {
    fn build(coefficients: &CoefficientField, lower: LowerOrder, t: f64, interior: &[bool]) -> Self {
        let grid = coefficients.grid();
        let n = grid.dim();
        let m = grid.nodes_per_axis();
        let mut strides = [0usize; MAX_DIM];
        for (d, s) in strides.iter_mut().enumerate().take(n) {
            *s = m.pow((n - 1 - d) as u32);
        }
        let mut x = [0.0; MAX_DIM];
        let mut diag = Vec::with_capacity(grid.space_nodes());
        let mut off = Vec::with_capacity(grid.space_nodes());
        for i in 0..grid.space_nodes() {
            grid.node_point(i, &mut x[..n]);
            let g = coefficients.eval(&x[..n], t);
            diag.push([g[0][0], g[1][1], g[2][2]]);
            off.push([g[0][1], g[0][2], g[1][2]]);
        }
        Self { n, h: grid.spacing(), strides, interior: interior.to_vec(), diag, off, lower }
    }

    fn apply_at(&self, u: &[f64], i: usize) -> f64 {
        let h2 = self.h * self.h;
        let mut sum = 0.0;
        for d in 0..self.n {
            let s = self.strides[d];
            let gp = 0.5 * (self.diag[i][d] + self.diag[i + s][d]);
            let gm = 0.5 * (self.diag[i][d] + self.diag[i - s][d]);
            sum += (gp * (u[i + s] - u[i]) - gm * (u[i] - u[i - s])) / h2;
            sum += self.lower.drift[d] * (u[i + s] - u[i - s]) / (2.0 * self.h);
        }
        for (k, &(d, e)) in PAIRS.iter().enumerate() {
            if e >= self.n {
                continue;
            }
            let (sd, se) = (self.strides[d], self.strides[e]);
            let t1 = self.off[i + sd][k] * (u[i + sd + se] - u[i + sd - se])
                - self.off[i - sd][k] * (u[i - sd + se] - u[i - sd - se]);
            let t2 = self.off[i + se][k] * (u[i + se + sd] - u[i + se - sd])
                - self.off[i - se][k] * (u[i - se + sd] - u[i - se - sd]);
            sum += (t1 + t2) / (4.0 * h2);
        }
        sum + self.lower.potential * u[i]
    }

    /// `out = u + k L u` on interior nodes, zero on the boundary.
    fn explicit(&self, u: &[f64], k: f64, out: &mut [f64]) {
        for i in 0..u.len() {
            out[i] = if self.interior[i] { u[i] + k * self.apply_at(u, i) } else { 0.0 };
        }
    }

    /// Solves `(I - k L) x = rhs` with `x = 0` on the boundary; `x` holds the
    /// initial guess on entry.
    fn implicit(&self, rhs: &[f64], k: f64, x: &mut [f64]) -> Result<()> {
        if self.n == 1 {
            let m = rhs.len();
            let h2 = self.h * self.h;
            let b = self.lower.drift[0];
            let mut lower = vec![0.0; m];
            let mut diag = vec![1.0; m];
            let mut upper = vec![0.0; m];
            let mut r = rhs.to_vec();
            for i in 0..m {
                if !self.interior[i] {
                    r[i] = 0.0;
                    continue;
                }
                let gp = 0.5 * (self.diag[i][0] + self.diag[i + 1][0]);
                let gm = 0.5 * (self.diag[i][0] + self.diag[i - 1][0]);
                lower[i] = -k * (gm / h2 - b / (2.0 * self.h));
                upper[i] = -k * (gp / h2 + b / (2.0 * self.h));
                diag[i] = 1.0 - k * (-(gp + gm) / h2 + self.lower.potential);
            }
            thomas(&lower, &diag, &upper, &mut r)?;
            x.copy_from_slice(&r);
            return Ok(());
        }
        let mut b = rhs.to_vec();
        for (i, v) in b.iter_mut().enumerate() {
            if !self.interior[i] {
                *v = 0.0;
            }
        }
        let apply = |u: &[f64], out: &mut [f64]| {
            for i in 0..u.len() {
                out[i] = if self.interior[i] { u[i] - k * self.apply_at(u, i) } else { u[i] };
            }
        };
        bicgstab(&apply, &b, x, ITERATIVE_TOLERANCE, MAX_ITERATIONS)?;
        Ok(())
    }
}

fn interior_mask(grid: &SpaceTimeGrid) -> Vec<bool> {
    let n = grid.dim();
    let mut idx = [0usize; MAX_DIM];
    (0..grid.space_nodes())
        .map(|i| {
            grid.multi_index(i, &mut idx[..n]);
            !grid.is_boundary(&idx[..n])
        })
        .collect()
}

/// Marches `data` forward in solver time from level `start` to the last
/// level; `time_of(level)` maps solver levels to the physical time at which
/// the coefficients are evaluated. Returns one slice per solver level.
fn march(
    coefficients: &CoefficientField,
    lower: LowerOrder,
    data: &[f64],
    start: usize,
    time_of: &dyn Fn(f64) -> f64,
) -> Result<Vec<Vec<f64>>> {
    let grid = coefficients.grid();
    let interior = interior_mask(grid);
    let dt = grid.time_step();
    let levels = grid.time_levels();
    let frozen = coefficients.is_time_independent();
    let build = |level: f64| Operator::build(coefficients, lower, time_of(level * dt), &interior);
    let mut u: Vec<f64> = data.iter().zip(&interior).map(|(v, &inside)| if inside { *v } else { 0.0 }).collect();
    let mut out = Vec::with_capacity(levels - start);
    out.push(u.clone());
    let mut current = build(start as f64);
    let mut rhs = vec![0.0; u.len()];
    for k in start..levels - 1 {
        let next = if frozen { None } else { Some(build((k + 1) as f64)) };
        let next_op = next.as_ref().unwrap_or(&current);
        if k - start < STARTUP_STEPS {
            let half = if frozen { None } else { Some(build(k as f64 + 0.5)) };
            let mid = u.clone();
            half.as_ref().unwrap_or(&current).implicit(&mid, 0.5 * dt, &mut u)?;
            let mid = u.clone();
            next_op.implicit(&mid, 0.5 * dt, &mut u)?;
        } else {
            current.explicit(&u, 0.5 * dt, &mut rhs);
            next_op.implicit(&rhs, 0.5 * dt, &mut u)?;
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(ErrorKind::NonFinite.at("solver", "solve"));
        }
        out.push(u.clone());
        if let Some(op) = next {
            current = op;
        }
    }
    Ok(out)
}

/// Solves the problem described by `spec`; the result is stored in physical
/// time order and its derivatives come from the cubic interpolant.
pub fn solve(spec: &SolveSpec) -> Result<ScalarField> {
    spec.validate()?;
    let grid = *spec.grid();
    let horizon = grid.horizon();
    let slices = match spec.direction {
        Direction::Forward => march(&spec.coefficients, spec.lower_order, &spec.data, 0, &|t| t)?,
        Direction::Backward => {
            let mut s = march(&spec.coefficients, spec.lower_order, &spec.data, 0, &|tau| horizon - tau)?;
            s.reverse();
            s
        }
    };
    let values: Vec<f64> = slices.into_iter().flatten().collect();
    ScalarField::from_values(grid, values, format!("solve[{:?}]({})", spec.direction, spec.data_label))
}

/// Discrete fundamental solution `G(x, t; y, s)` of the forward problem.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    field: ScalarField,
    source: Vec<f64>,
    source_time: f64,
    source_level: usize,
}

/// Number of time steps after the source before values are reported.
pub const SOURCE_GAP_STEPS: usize = 4;

impl FundamentalSolution {
    pub fn field(&self) -> &ScalarField {
        &self.field
    }
    pub fn source(&self) -> &[f64] {
        &self.source
    }
    pub fn source_time(&self) -> f64 {
        self.source_time
    }
    pub fn source_level(&self) -> usize {
        self.source_level
    }

    /// Earliest reported time, `s + 4Δt`.
    pub fn valid_from(&self) -> f64 {
        self.source_time + SOURCE_GAP_STEPS as f64 * self.field.grid().time_step()
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level < self.source_level + SOURCE_GAP_STEPS || level >= self.field.grid().time_levels() {
            return Err(ErrorKind::Precondition(format!(
                "time level {level} is within {SOURCE_GAP_STEPS} steps of the source or past the horizon"
            ))
            .at("solver", "fundamental_solution"));
        }
        Ok(())
    }

    /// Nodal values at a time level.
    pub fn slice(&self, level: usize) -> Result<&[f64]> {
        self.check_level(level)?;
        Ok(self.field.slice(level))
    }

    pub fn value(&self, x: &[f64], t: f64) -> Result<f64> {
        if t < self.valid_from() - 1e-12 {
            return Err(ErrorKind::Precondition(format!("t = {t} is before s + 4Δt = {}", self.valid_from()))
                .at("solver", "fundamental_solution"));
        }
        Ok(self.field.value(x, t))
    }

    /// `Σ G h^n` at a time level.
    pub fn mass(&self, level: usize) -> Result<f64> {
        let g = self.field.grid();
        Ok(self.slice(level)?.iter().sum::<f64>() * g.spacing().powi(g.dim() as i32))
    }
}

/// Forward solve from a grid delta of mass one at node `y`, time `s`.
pub fn fundamental_solution(
    coefficients: &CoefficientField,
    lower: LowerOrder,
    source: &[f64],
    source_time: f64,
) -> Result<FundamentalSolution> {
    let op = "fundamental_solution";
    let grid = *coefficients.grid();
    let n = grid.dim();
    if source.len() != n {
        return Err(ErrorKind::DimensionMismatch { expected: n, found: source.len() }.at("solver", op));
    }
    let mut idx = [0usize; MAX_DIM];
    for d in 0..n {
        idx[d] = grid.node_of(source[d]).ok_or_else(|| {
            ErrorKind::Precondition(format!("source coordinate {} is not a grid node", source[d])).at("solver", op)
        })?;
    }
    if grid.is_boundary(&idx[..n]) {
        return Err(ErrorKind::Precondition("source on the boundary".into()).at("solver", op));
    }
    let q = source_time / grid.time_step();
    let level = q.round();
    if (q - level).abs() > 1e-9 || level < 0.0 || level as usize + SOURCE_GAP_STEPS >= grid.time_levels() {
        return Err(ErrorKind::Precondition(format!("source time {source_time} is not a usable time level"))
            .at("solver", op));
    }
    let level = level as usize;
    let mut data = vec![0.0; grid.space_nodes()];
    data[grid.flat_index(&idx[..n])] = grid.spacing().powi(-(n as i32));
    let slices = march(coefficients, lower, &data, level, &|t| t)?;
    let mut values = vec![0.0; grid.space_nodes() * level];
    values.extend(slices.into_iter().flatten());
    let field = ScalarField::from_values(grid, values, format!("G(.;{source:?},{source_time})"))?;
    Ok(FundamentalSolution { field, source: source.to_vec(), source_time, source_level: level })
}

/// The heat kernel `(4π t)^{-n/2} e^{-|x|²/4t}`.
pub fn heat_kernel(x: &[f64], t: f64) -> f64 {
    let n = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * std::f64::consts::PI * t).powf(-n / 2.0) * (-r2 / (4.0 * t)).exp()
}

/// Largest nodal `|G - K|` over `max |K|` at time level `level`, where `K`
/// is the heat kernel of the elapsed time.
pub fn kernel_error(g: &FundamentalSolution, level: usize) -> Result<f64> {
    let grid = *g.field().grid();
    let n = grid.dim();
    let elapsed = grid.time(level) - g.source_time();
    let slice = g.slice(level)?;
    let mut x = [0.0; MAX_DIM];
    let (mut err, mut peak) = (0.0_f64, 0.0_f64);
    for (i, v) in slice.iter().enumerate() {
        grid.node_point(i, &mut x[..n]);
        for d in 0..n {
            x[d] -= g.source()[d];
        }
        let k = heat_kernel(&x[..n], elapsed);
        err = err.max((v - k).abs());
        peak = peak.max(k);
    }
    Ok(err / peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::coefficients::CoefficientModel;

    fn grid1(h: f64, dt: f64, t: f64) -> SpaceTimeGrid {
        SpaceTimeGrid::new(1, 6.0, h, t, dt).unwrap()
    }

    #[test]
    fn constants_and_zero_are_preserved() {
        let grid = SpaceTimeGrid::new(1, 3.0, 0.1, 0.5, 0.01).unwrap();
        let spec = SolveSpec {
            coefficients: CoefficientField::identity(grid),
            direction: Direction::Backward,
            lower_order: LowerOrder::default(),
            bound: 0.0,
            data_label: "zero".into(),
            data: vec![0.0; grid.space_nodes()],
        };
        let u = solve(&spec).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn heat_kernel_is_reproduced() {
        let grid = grid1(0.05, 0.0025, 0.2);
        let g = fundamental_solution(&CoefficientField::identity(grid), LowerOrder::default(), &[0.0], 0.0).unwrap();
        let level = 40;
        let err = kernel_error(&g, level).unwrap();
        assert!(err < 0.02, "{err}");
        let m0 = g.mass(4).unwrap();
        let m1 = g.mass(80).unwrap();
        assert!((m0 - 1.0).abs() < 1e-6 && (m1 - 1.0).abs() < 1e-6);
        assert!(g.field().values().iter().all(|&v| v >= -1e-12));
        assert!(g.value(&[0.0], 0.005).is_err());
    }

    #[test]
    fn backward_solve_matches_backward_kernel() {
        // (2 - t)^{-1/2} exp(-x^2 / 4(2 - t)) solves Δu + ∂_t u = 0
        let grid = SpaceTimeGrid::new(1, 8.0, 0.05, 1.0, 0.0025).unwrap();
        let exact = |x: f64, t: f64| (2.0 - t).powf(-0.5) * (-x * x / (4.0 * (2.0 - t))).exp();
        let mut x = [0.0];
        let data = (0..grid.space_nodes())
            .map(|i| {
                grid.node_point(i, &mut x);
                exact(x[0], 1.0)
            })
            .collect();
        let spec = SolveSpec {
            coefficients: CoefficientField::identity(grid),
            direction: Direction::Backward,
            lower_order: LowerOrder::default(),
            bound: 0.0,
            data_label: "kernel".into(),
            data,
        };
        let u = solve(&spec).unwrap();
        for i in (0..grid.nodes_per_axis()).step_by(17) {
            let xi = grid.coordinate(i);
            if xi.abs() <= 4.0 {
                assert!((u.node_value(0, i) - exact(xi, 0.0)).abs() < 1e-4, "{xi}");
            }
        }
    }

    #[test]
    fn symmetric_coefficients_give_symmetric_kernel() {
        let grid = SpaceTimeGrid::new(2, 2.0, 0.1, 0.1, 0.01).unwrap();
        let model = CoefficientModel::Perturbed { epsilon: 0.1, off_diagonal: 0.05, wavenumber: 1.0, frequency: 0.0 };
        let c = CoefficientField::perturbed(grid, model, 0.8).unwrap();
        let (y, z) = ([0.3, -0.2], [-0.4, 0.5]);
        let gy = fundamental_solution(&c, LowerOrder::default(), &y, 0.0).unwrap();
        let gz = fundamental_solution(&c, LowerOrder::default(), &z, 0.0).unwrap();
        let level = grid.time_levels() - 1;
        let iz = grid.flat_index(&[grid.node_of(z[0]).unwrap(), grid.node_of(z[1]).unwrap()]);
        let iy = grid.flat_index(&[grid.node_of(y[0]).unwrap(), grid.node_of(y[1]).unwrap()]);
        let a = gy.slice(level).unwrap()[iz];
        let b = gz.slice(level).unwrap()[iy];
        assert!((a - b).abs() < 1e-6 * a.abs().max(1e-3), "{a} vs {b}");
    }

    #[test]
    fn lower_order_terms_respect_bound() {
        let grid = SpaceTimeGrid::new(1, 2.0, 0.1, 0.1, 0.01).unwrap();
        let spec = SolveSpec {
            coefficients: CoefficientField::identity(grid),
            direction: Direction::Forward,
            lower_order: LowerOrder { drift: [0.2, 0.0, 0.0], potential: 0.0 },
            bound: 0.1,
            data_label: "x".into(),
            data: vec![1.0; grid.space_nodes()],
        };
        assert!(solve(&spec).is_err());
    }
}
