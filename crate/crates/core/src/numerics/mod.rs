//! Grids, fields, Gaussian weights and quadrature.

pub mod coefficients;
pub mod field;
pub mod grid;
pub mod quadrature;
pub mod region;
pub mod transform;
pub mod weight;

pub use coefficients::{CoefficientField, CoefficientModel};
pub use field::{DerivativeSource, Jet, ScalarField, SpaceTimeField};
pub use grid::{SpaceTimeGrid, MAX_DIM};
pub use quadrature::{weighted_integral, weighted_integrals, IntegrandKind, Quadrature, QuadratureRule};
pub use region::{
    ball_integral, ball_integral_of_degree, cylinder_integral, cylinder_integral_of_degree, sphere_integral, Region,
};
pub use transform::{Rescaled, Translated};
pub use weight::{effective_radius, GaussianWeight};
