//! Constrained upper-quantile-bound Bayesian optimization for composite functions.

pub mod acqopt;
pub mod acquisition;
pub mod cuqb;
pub mod error;
pub mod gp;
pub mod optim;
pub mod outer;
pub mod problems;
pub mod quantile;
pub mod softsort;
pub mod solvers;
pub mod space;
pub mod trace;

pub use error::{Error, Result};
pub use gp::{Dataset, GpSurrogate, KernelHyper, PosteriorGradients, PosteriorMoments};
pub use problems::{CompositeProblem, KnownOptimum};
pub use space::Bounds;
pub use cuqb::CuqbConfig;
pub use solvers::{RunRecord, RunStatus, Solver};
