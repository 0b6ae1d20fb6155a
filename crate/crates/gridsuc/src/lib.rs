//! Stochastic unit commitment under wind uncertainty.

pub mod forecast;
pub mod grid;
mod linalg;
pub mod solver;
pub mod suc;
