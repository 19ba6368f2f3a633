//! The constrained upper quantile bound algorithm.
//!
//! Each iteration maximizes `u_0(x) - rho sum_i [-u_i(x)]^+` built from
//! upper quantile bounds of the composite predictions, and every queried
//! point is scored by the same penalized expression on lower bounds under the
//! model that selected it. The recommendation is the best-scored point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acqopt::{maximize_penalized, sobol_candidates, MultiStartConfig, Surface};
use crate::error::{invalid, Result};
use crate::gp::GpSurrogate;
use crate::problems::CompositeProblem;
use crate::quantile::{BaseSamples, QuantileBounds, QuantileConfig, Schedule, Side};
use crate::space::Bounds;

pub const DEFAULT_RHO: f64 = 1e5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuqbConfig {
    pub quantile: QuantileConfig,
    pub multistart: MultiStartConfig,
    pub rho: f64,
    /// Initial design size; `2d + 1` when unset.
    pub init_budget: Option<usize>,
    pub total_budget: usize,
    pub noise_std: f64,
    pub infeasibility_check: bool,
    /// Schedule used by the infeasibility check; the sampling schedule when unset.
    pub infeasibility_schedule: Option<Schedule>,
    pub find_rho: bool,
    /// Random restarts for the first hyperparameter fit.
    pub gp_restarts: usize,
    /// Every this many iterations a refit adds one random restart to the warm start.
    pub gp_restart_every: usize,
    pub seed: u64,
}

impl Default for CuqbConfig {
    fn default() -> Self {
        Self {
            quantile: QuantileConfig::default(),
            multistart: MultiStartConfig::default(),
            rho: DEFAULT_RHO,
            init_budget: None,
            total_budget: 100,
            noise_std: 0.0,
            infeasibility_check: true,
            infeasibility_schedule: None,
            find_rho: false,
            gp_restarts: crate::gp::DEFAULT_RESTARTS,
            gp_restart_every: 10,
            seed: 0,
        }
    }
}

impl CuqbConfig {
    pub fn init_budget_for(&self, d: usize) -> usize {
        self.init_budget.unwrap_or(2 * d + 1)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.quantile.validate()?;
        self.multistart.validate()?;
        let t0 = self.init_budget_for(d);
        if t0 == 0 || t0 > self.total_budget {
            return invalid(format!("need 0 < T0 <= T, got T0 = {t0}, T = {}", self.total_budget));
        }
        if !(self.rho > 0.0) {
            return invalid(format!("penalty must be positive, got {}", self.rho));
        }
        if !(self.noise_std >= 0.0) {
            return invalid(format!("noise standard deviation must be non-negative, got {}", self.noise_std));
        }
        Ok(())
    }

    fn check_config(&self) -> QuantileConfig {
        QuantileConfig { schedule: self.infeasibility_schedule.unwrap_or(self.quantile.schedule), ..self.quantile.clone() }
    }
}

/// `T0` points drawn uniformly from the box.
pub fn initial_design(bounds: &Bounds, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..n)
        .map(|_| bounds.lower.iter().zip(&bounds.upper).map(|(l, u)| if u > l { rng.random_range(*l..*u) } else { *l }).collect())
        .collect()
}

/// `v_0 - rho sum_i [-v_i]^+`.
pub fn penalized(v: &[f64], rho: f64) -> f64 {
    v[0] - rho * v[1..].iter().map(|u| (-u).max(0.0)).sum::<f64>()
}

/// The penalized quantile surface maximized by [`cuqb_step`].
pub struct PenalizedSurface<'a> {
    pub bounds: QuantileBounds<'a>,
    pub side: Side,
    pub rho: f64,
}

impl PenalizedSurface<'_> {
    fn all(&self) -> Vec<usize> {
        (0..=self.bounds.problem.n()).collect()
    }
}

impl Surface for PenalizedSurface<'_> {
    fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.bounds.batch(xs, self.side, &self.all())?.iter().map(|v| penalized(v, self.rho)).collect())
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let b = self.bounds.with_gradients(x, self.side, &self.all())?;
        let vals: Vec<f64> = b.iter().map(|r| r.0).collect();
        let mut grad = b[0].1.clone();
        for (v, g) in &b[1..] {
            if *v < 0.0 {
                for (o, gi) in grad.iter_mut().zip(g) {
                    *o += self.rho * gi;
                }
            }
        }
        Ok((penalized(&vals, self.rho), grad))
    }
}

/// One outer function's bound as a surface.
struct SingleBound<'a> {
    bounds: QuantileBounds<'a>,
    index: usize,
}

impl Surface for SingleBound<'_> {
    fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.bounds.batch(xs, Side::Upper, &[self.index])?.into_iter().map(|v| v[0]).collect())
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok(self.bounds.with_gradients(x, Side::Upper, &[self.index])?.remove(0))
    }
}

/// Index of the first constraint whose maximized upper bound is negative.
pub fn check_infeasibility(
    model: &GpSurrogate,
    problem: &CompositeProblem,
    cfg: &CuqbConfig,
    z: &BaseSamples,
    t: usize,
    ms: &MultiStartConfig,
) -> Result<Option<usize>> {
    let n = problem.n();
    if n == 0 {
        return Ok(None);
    }
    let qcfg = cfg.check_config();
    let qb = QuantileBounds { problem, model, cfg: &qcfg, z, t };
    let cands = sobol_candidates(&problem.bounds, ms.n_raw, ms.seed);
    let which: Vec<usize> = (1..=n).collect();
    let raw = qb.batch(&cands, Side::Upper, &which)?;
    for i in 1..=n {
        let raw_max = raw.iter().map(|r| r[i - 1]).fold(f64::NEG_INFINITY, f64::max);
        if raw_max >= 0.0 {
            continue;
        }
        let out = maximize_penalized(&SingleBound { bounds: qb, index: i }, &problem.bounds, ms)?;
        if out.value < 0.0 {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Next query: the maximizer of the penalized upper-bound surface, and its value.
pub fn cuqb_step(
    model: &GpSurrogate,
    problem: &CompositeProblem,
    cfg: &CuqbConfig,
    z: &BaseSamples,
    t: usize,
    rho: f64,
    ms: &MultiStartConfig,
) -> Result<(Vec<f64>, f64)> {
    let surface = PenalizedSurface { bounds: QuantileBounds { problem, model, cfg: &cfg.quantile, z, t }, side: Side::Upper, rho };
    let out = maximize_penalized(&surface, &problem.bounds, ms)?;
    Ok((out.x, out.value))
}

/// Penalized lower-bound score of `x` under one model snapshot.
pub fn recommendation_score(
    model: &GpSurrogate,
    problem: &CompositeProblem,
    cfg: &CuqbConfig,
    z: &BaseSamples,
    t: usize,
    rho: f64,
    x: &[f64],
) -> Result<f64> {
    let qb = QuantileBounds { problem, model, cfg: &cfg.quantile, z, t };
    let all: Vec<usize> = (0..=problem.n()).collect();
    Ok(penalized(&qb.at(x, Side::Lower, &all)?, rho))
}

/// 0-based index of the best score; later points win ties.
pub fn recommend(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s >= scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// 0-based index of the best noisy observation: largest objective among
/// observed-feasible points, else largest penalized objective.
pub fn naive_recommend(observed: &[Vec<f64>], rho: f64) -> Option<usize> {
    let feasible: Vec<usize> = (0..observed.len()).filter(|&i| observed[i][1..].iter().all(|v| *v >= 0.0)).collect();
    let key = |i: usize| if feasible.is_empty() { penalized(&observed[i], rho) } else { observed[i][0] };
    let pool: Vec<usize> = if feasible.is_empty() { (0..observed.len()).collect() } else { feasible.clone() };
    let mut best: Option<usize> = None;
    for i in pool {
        if best.is_none_or(|b| key(i) >= key(b)) {
            best = Some(i);
        }
    }
    best
}

/// Smallest `rho = 2^k` for which the maximized penalized upper bound does not
/// exceed the best lower-bound-feasible lower bound, or `None` when no point
/// is feasible for the lower bounds or no `rho` up to `max_rho` works.
#[allow(clippy::too_many_arguments)]
pub fn find_rho(
    model: &GpSurrogate,
    problem: &CompositeProblem,
    cfg: &CuqbConfig,
    z: &BaseSamples,
    ms: &MultiStartConfig,
    max_rho: f64,
    rel_tol: f64,
) -> Result<Option<f64>> {
    let qb = QuantileBounds { problem, model, cfg: &cfg.quantile, z, t: 0 };
    let all: Vec<usize> = (0..=problem.n()).collect();
    let lower = PenalizedSurface { bounds: qb, side: Side::Lower, rho: max_rho };
    let best_lower = maximize_penalized(&lower, &problem.bounds, ms)?;
    let l = qb.at(&best_lower.x, Side::Lower, &all)?;
    if l[1..].iter().any(|v| *v < 0.0) {
        return Ok(None);
    }
    let l_star = l[0];
    let mut rho = 1.0;
    while rho <= max_rho {
        let upper = PenalizedSurface { bounds: qb, side: Side::Upper, rho };
        let m = maximize_penalized(&upper, &problem.bounds, ms)?.value;
        if m <= l_star + rel_tol * l_star.abs().max(1.0) {
            return Ok(Some(rho));
        }
        rho *= 2.0;
    }
    Ok(None)
}

/// Runs the algorithm end to end.
pub fn run(problem: &CompositeProblem, cfg: &CuqbConfig) -> Result<crate::solvers::RunRecord> {
    crate::solvers::run_solver(crate::solvers::Solver::Cuqb, problem, cfg)
}
