pub mod carleman;
pub mod certifiers;
pub mod cli;
pub mod config;
pub mod error;
pub mod frequency;
pub mod io;
pub mod numerics;
pub mod oracles;
pub mod solver;
pub mod suite;

pub use error::{Error, ErrorKind, Result};
