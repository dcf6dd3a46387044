//! Carleman weights `θ`, `β`, `σ` and a two-sided evaluator for the weighted
//! inequality.

pub mod gk;
pub mod inequality;
pub mod weights;

pub use weights::{check_sigma_ode, sigma_table, theta, Beta, CarlemanWeightTable, OdeReport, Sigma};

pub use inequality::{
    DEFAULT_DELTA, N_CAP,
    carleman_inequality_eval, check_sigma_weight_bound, BumpField, CarlemanInequalityReport, CarlemanParams,
    CarlemanTerms, InequalityQuadrature, WeightBoundReport,
};
