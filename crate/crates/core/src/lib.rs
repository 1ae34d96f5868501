//! Hybrid indoor localization by simplex-constrained fusion of
//! per-technology position estimates.

pub mod error;
pub mod fusion;
pub mod harness;
pub mod io;
pub mod model;
pub mod penalty;
pub mod sim;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};
