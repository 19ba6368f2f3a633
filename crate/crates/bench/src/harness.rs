use rayon::prelude::*;

use cuqb_core::problems::{self, CompositeProblem};
use cuqb_core::solvers::run_solver;
use cuqb_core::{CuqbConfig, Error, Result, RunRecord, Solver};

/// A solver x problem x seed grid sharing one base configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub problems: Vec<String>,
    pub solvers: Vec<Solver>,
    pub seeds: Vec<u64>,
    pub base: CuqbConfig,
}

impl Experiment {
    pub fn resolve_problems(&self) -> Result<Vec<CompositeProblem>> {
        self.problems.iter().map(|n| problems::get(n)).collect()
    }

    fn cells(&self) -> Vec<(usize, Solver, u64)> {
        let mut cells = Vec::new();
        for k in 0..self.problems.len() {
            for &s in &self.solvers {
                for &seed in &self.seeds {
                    cells.push((k, s, seed));
                }
            }
        }
        cells
    }
}

/// Runs every cell of the grid on `jobs` worker threads. Records come back in
/// problem, solver, seed order regardless of scheduling.
pub fn run_grid(exp: &Experiment, jobs: usize) -> Result<Vec<RunRecord>> {
    if jobs == 0 {
        return Err(Error::InvalidArgument("jobs must be at least 1".into()));
    }
    let problems = exp.resolve_problems()?;
    let cells = exp.cells();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, solver, seed)| run_solver(solver, &problems[k], &CuqbConfig { seed, ..exp.base.clone() }))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cuqb_core::acqopt::MultiStartConfig;

    #[test]
    fn grid_order_and_thread_independence() {
        let exp = Experiment {
            problems: vec!["booth".into(), "wolfe".into()],
            solvers: vec![Solver::Random, Solver::Epbo],
            seeds: vec![0, 1],
            base: CuqbConfig {
                total_budget: 9,
                gp_restarts: 1,
                multistart: MultiStartConfig { n_raw: 64, n_starts: 1, ..Default::default() },
                ..Default::default()
            },
        };
        let one = run_grid(&exp, 1).unwrap();
        let two = run_grid(&exp, 2).unwrap();
        assert_eq!(one.len(), 8);
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(a.summary, b.summary);
            assert_eq!(a.iterations.iter().map(|i| &i.x).collect::<Vec<_>>(), b.iterations.iter().map(|i| &i.x).collect::<Vec<_>>());
        }
        assert_eq!(one[0].summary.problem, "booth");
        assert_eq!(one[2].summary.solver, Solver::Epbo);
        assert_eq!(one[5].summary.seed, 1);
        assert!(run_grid(&exp, 0).is_err());
    }
}
