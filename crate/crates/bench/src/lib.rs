//! Experiment harness for the CUQB solvers: seeded run grids, regret traces
//! and performance profiles.

pub mod harness;
pub mod metrics;

pub use harness::{run_grid, Experiment};
pub use metrics::{build_profiles, penalized_value, perf_test, ProfileTable, RegretTrace, SolverTrace};
