//! Simulation and analysis of small-noise systems whose fast drift is a
//! signed power `|y|^gamma sgn(y)` near the hyperplane `y = 0`.

pub mod analysis;
pub mod coeffs;
pub mod error;
pub mod experiments;
pub mod extremal;
pub mod sim;

pub use error::{Error, Result};
