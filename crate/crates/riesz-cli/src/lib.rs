//! Command-line front end for the Riesz potential toolkit, plus the
//! walk-on-spheres Monte Carlo oracle used to cross-validate it.

pub mod commands;
pub mod config;
pub mod wos;

pub use commands::{run, EXIT_COMPUTE, EXIT_CONFIG, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_OK};

/// Entry point for the binary: parse `std::env::args` and run.
pub fn run_from_env() -> i32 {
    run(std::env::args().collect())
}
