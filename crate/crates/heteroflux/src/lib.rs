//! Finite volume solvers and diagnostics for a 1D two-phase flow model with
//! a rock-type discontinuity at x = 0.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod flux_models;
pub mod numerical_fluxes;
pub mod reference;
pub mod scan;
pub mod solver;

pub use error::{Error, Result};

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    cli::main_entry()
}
