//! Bilateral collateral switching game: market simulation, XVA surfaces,
//! switching costs, game evaluation and equilibrium solvers.

pub mod config;
pub mod error;
pub mod market;
pub mod regression;
pub mod valuation;
pub mod costs;
pub mod game;
pub mod solver;
pub mod run;

pub use error::{EngineError, Result};
