//! Short-term scheduling of hydro valleys.
//!
//! The crate models a valley of reservoirs linked by delayed releases,
//! solves its continuous relaxation as a network LP, and offers two
//! decomposition methods plus a greedy baseline for the discrete problem.

pub mod bench;
pub mod cli;
pub mod dp;
pub mod error;
pub mod heuristic;
pub mod lp;
pub mod model;
pub mod predict;
pub mod price;

pub use error::{HydroError, Result};
