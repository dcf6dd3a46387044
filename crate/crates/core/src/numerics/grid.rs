use serde::{Deserialize, Serialize};

use crate::error::{ErrorKind, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Uniform tensor-product grid on `[-L, L]^n x [0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    dim: usize,
    half_width: f64,
    spacing: f64,
    horizon: f64,
    time_step: f64,
    nodes_per_axis: usize,
    time_levels: usize,
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let q = num / den;
    let r = q.round();
    if r >= 1.0 && (q - r).abs() <= 1e-9 * r.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

impl SpaceTimeGrid {
    pub fn new(dim: usize, half_width: f64, spacing: f64, horizon: f64, time_step: f64) -> Result<Self> {
        let bad = |msg: String| Err(ErrorKind::InvalidGrid(msg).at("numerics", "grid"));
        if dim == 0 || dim > MAX_DIM {
            return bad(format!("dimension {dim} outside 1..={MAX_DIM}"));
        }
        if !(half_width > 0.0 && spacing > 0.0) || !half_width.is_finite() || !spacing.is_finite() {
            return bad("half-width and spacing must be positive".into());
        }
        let Some(cells) = integer_ratio(half_width, spacing) else {
            return bad(format!("L/h = {} is not a positive integer", half_width / spacing));
        };
        if !(time_step > 0.0) || !(horizon > 0.0) || !horizon.is_finite() {
            return bad("time step and horizon must be positive".into());
        }
        let Some(steps) = integer_ratio(horizon, time_step) else {
            return bad(format!("T/dt = {} is not a positive integer", horizon / time_step));
        };
        Ok(Self {
            dim,
            half_width,
            spacing,
            horizon,
            time_step,
            nodes_per_axis: 2 * cells + 1,
            time_levels: steps + 1,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn time_step(&self) -> f64 {
        self.time_step
    }
    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }
    pub fn time_levels(&self) -> usize {
        self.time_levels
    }

    /// Number of spatial nodes, `m^n`.
    pub fn space_nodes(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -self.half_width + index as f64 * self.spacing
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.time_step
    }

    /// Row-major flat index of a multi-index (last axis fastest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.nodes_per_axis + i)
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for d in (0..self.dim).rev() {
            out[d] = flat % self.nodes_per_axis;
            flat /= self.nodes_per_axis;
        }
    }

    pub fn node_point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; MAX_DIM];
        self.multi_index(flat, &mut idx[..self.dim]);
        for d in 0..self.dim {
            out[d] = self.coordinate(idx[d]);
        }
    }

    /// Index of the node nearest to `x` on one axis, if `x` is a node.
    pub fn node_of(&self, x: f64) -> Option<usize> {
        let q = (x + self.half_width) / self.spacing;
        let r = q.round();
        if r < 0.0 || r as usize >= self.nodes_per_axis || (q - r).abs() > 1e-9 {
            None
        } else {
            Some(r as usize)
        }
    }

    /// Same box and horizon with spacing and time step halved.
    pub fn refined(&self) -> Self {
        Self::new(self.dim, self.half_width, self.spacing / 2.0, self.horizon, self.time_step / 2.0)
            .expect("halving a valid grid stays valid")
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.dim, self.half_width, self.spacing, horizon, self.time_step)
    }

    pub fn with_time_step(&self, time_step: f64) -> Result<Self> {
        Self::new(self.dim, self.half_width, self.spacing, self.horizon, time_step)
    }

    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        idx.iter().any(|&i| i == 0 || i + 1 == self.nodes_per_axis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_integer_ratio() {
        assert!(SpaceTimeGrid::new(1, 1.0, 0.3, 1.0, 0.1).is_err());
        assert!(SpaceTimeGrid::new(1, 1.0, 0.25, 1.0, 0.3).is_err());
        assert!(SpaceTimeGrid::new(4, 1.0, 0.25, 1.0, 0.1).is_err());
        assert!(SpaceTimeGrid::new(1, 1.0, 0.25, 1.0, 0.0).is_err());
    }

    #[test]
    fn symmetric_nodes() {
        let g = SpaceTimeGrid::new(2, 6.0, 0.05, 16.0, 0.01).unwrap();
        assert_eq!(g.nodes_per_axis(), 241);
        assert_eq!(g.time_levels(), 1601);
        assert_eq!(g.coordinate(120), 0.0);
        assert!((g.coordinate(0) + g.coordinate(240)).abs() < 1e-12);
        let mut idx = [0usize; 2];
        g.multi_index(g.flat_index(&[17, 203]), &mut idx);
        assert_eq!(idx, [17, 203]);
        assert_eq!(g.node_of(0.0), Some(120));
        assert_eq!(g.node_of(0.01), None);
    }
}
