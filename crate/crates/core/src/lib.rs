//! Numerical laboratory for models of irreversibility: entropy inequalities,
//! two-reservoir heat flow, kinetic Brownian motion, Cherenkov friction and
//! stochastic collapse on tensor chains.

pub mod error;
pub mod eth;
pub mod friction;
pub mod linalg;
pub mod par;
pub mod qbm;
pub mod qcore;
pub mod seed;
pub mod thermo;

pub use error::{Error, Result};
pub use par::Exec;
