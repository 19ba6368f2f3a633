//! Penalized values, regret traces and performance profiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use cuqb_core::problems::CompositeProblem;
use cuqb_core::{Error, Result, RunRecord};

/// `F(x) = f_0(x) - rho sum_i [-f_i(x)]^+` on the noise-free problem.
pub fn penalized_value(problem: &CompositeProblem, x: &[f64], rho: f64) -> Result<f64> {
    let f = problem.evaluate(x)?;
    Ok(penalize(&f, rho))
}

fn penalize(f: &[f64], rho: f64) -> f64 {
    f[0] - rho * f[1..].iter().map(|v| (-v).max(0.0)).sum::<f64>()
}

/// `F_w - F(x0) >= (1 - tau)(F_U - F(x0))`.
pub fn perf_test(f_w: f64, f_x0: f64, f_u: f64, tau: f64) -> bool {
    f_w - f_x0 >= (1.0 - tau) * (f_u - f_x0)
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Regret of one run against the known optimum, indexed by evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub optimum: f64,
    /// `min_{t' <= t} (f_0^* - f_0(x_t'))`.
    pub simple: Vec<f64>,
    /// Penalized regret of the query at `t`.
    pub penalized_query: Vec<f64>,
    /// Penalized regret of the recommendation after `t` evaluations.
    pub penalized_recommended: Vec<f64>,
    /// Largest constraint violation of the recommendation after `t` evaluations.
    pub recommended_violation: Vec<f64>,
}

impl RegretTrace {
    pub fn from_record(problem: &CompositeProblem, record: &RunRecord, rho: f64) -> Result<Self> {
        let optimum = problem
            .known_optimum
            .as_ref()
            .map(|o| o.value)
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no recorded optimum", problem.name)))?;
        let mut simple = Vec::with_capacity(record.iterations.len());
        let mut penalized_query = Vec::with_capacity(record.iterations.len());
        let mut penalized_recommended = Vec::with_capacity(record.iterations.len());
        let mut recommended_violation = Vec::with_capacity(record.iterations.len());
        let mut best = f64::INFINITY;
        let mut values = Vec::with_capacity(record.iterations.len());
        for it in &record.iterations {
            let f = problem.evaluate(&it.x)?;
            best = best.min(optimum - f[0]);
            simple.push(best);
            penalized_query.push(optimum - penalize(&f, rho));
            values.push(f);
            let fr = &values[it.rec_index - 1];
            penalized_recommended.push(optimum - penalize(fr, rho));
            recommended_violation.push(fr[1..].iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max));
        }
        Ok(Self { optimum, simple, penalized_query, penalized_recommended, recommended_violation })
    }
}

/// Penalized values of one run, the input to profile construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub solver: String,
    pub seed: u64,
    /// Best penalized value in the initial design.
    pub init_best: f64,
    /// Penalized value of the recommendation after `t` evaluations, `t = 1..`.
    pub recommended: Vec<f64>,
    /// Best penalized value among the first `t` queries.
    pub best_queried: Vec<f64>,
}

impl SolverTrace {
    pub fn from_record(problem: &CompositeProblem, record: &RunRecord, rho: f64) -> Result<Self> {
        let values: Vec<f64> = record.iterations.iter().map(|it| penalized_value(problem, &it.x, rho)).collect::<Result<_>>()?;
        let t0 = record.summary.init_budget.min(values.len());
        let init_best = values[..t0].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let recommended = record.iterations.iter().map(|it| values[it.rec_index - 1]).collect();
        let best_queried = values
            .iter()
            .scan(f64::NEG_INFINITY, |b, v| {
                *b = b.max(*v);
                Some(*b)
            })
            .collect();
        Ok(Self { solver: record.summary.solver.to_string(), seed: record.summary.seed, init_best, recommended, best_queried })
    }

    /// Value after `t` evaluations, held at the last entry for runs that stopped early.
    pub fn recommended_at(&self, t: usize) -> f64 {
        self.recommended[(t.max(1) - 1).min(self.recommended.len() - 1)]
    }
}

/// First-pass budgets `pi[problem][solver]` and the resulting profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub tau: f64,
    pub budget: usize,
    pub solvers: Vec<String>,
    pub problems: Vec<String>,
    /// `None` when the solver never passes within the budget.
    pub pi: Vec<Vec<Option<usize>>>,
    pub f_x0: Vec<f64>,
    pub f_u: Vec<f64>,
}

impl ProfileTable {
    /// Fraction of problems solved by solver `s` within `t` evaluations.
    pub fn rho(&self, s: usize, t: usize) -> f64 {
        if self.problems.is_empty() {
            return 0.0;
        }
        let solved = self.pi.iter().filter(|row| row[s].is_some_and(|p| p <= t)).count();
        solved as f64 / self.problems.len() as f64
    }

    pub fn curve(&self, s: usize) -> Vec<f64> {
        (1..=self.budget).map(|t| self.rho(s, t)).collect()
    }

    /// `t` followed by one profile column per solver.
    pub fn curves_delimited(&self, sep: char) -> String {
        let mut out = std::iter::once("t".to_string()).chain(self.solvers.iter().cloned()).collect::<Vec<_>>().join(&sep.to_string());
        out.push('\n');
        for t in 1..=self.budget {
            let row: Vec<String> = std::iter::once(t.to_string()).chain((0..self.solvers.len()).map(|s| format!("{}", self.rho(s, t)))).collect();
            out.push_str(&row.join(&sep.to_string()));
            out.push('\n');
        }
        out
    }

    /// One row per problem with the first-pass budget of each solver, empty when never passed.
    pub fn pi_delimited(&self, sep: char) -> String {
        let mut out = std::iter::once("problem".to_string()).chain(self.solvers.iter().cloned()).collect::<Vec<_>>().join(&sep.to_string());
        out.push('\n');
        for (k, row) in self.pi.iter().enumerate() {
            let cells: Vec<String> = std::iter::once(self.problems[k].clone()).chain(row.iter().map(|p| p.map_or(String::new(), |v| v.to_string()))).collect();
            out.push_str(&cells.join(&sep.to_string()));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("table serializes");
        let curves: BTreeMap<&str, Vec<f64>> = self.solvers.iter().enumerate().map(|(s, name)| (name.as_str(), self.curve(s))).collect();
        v["curves"] = serde_json::to_value(curves).expect("curves serialize");
        v
    }
}

/// Builds profiles from per-problem traces of every solver over a common seed set.
pub fn profiles_from_traces(problems: &[(String, Vec<SolverTrace>)], tau: f64) -> Result<ProfileTable> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau must lie in [0, 1], got {tau}")));
    }
    let mut solvers: Vec<String> = Vec::new();
    for (_, traces) in problems {
        for tr in traces {
            if !solvers.contains(&tr.solver) {
                solvers.push(tr.solver.clone());
            }
        }
    }
    let budget = problems.iter().flat_map(|(_, ts)| ts.iter().map(|t| t.recommended.len())).max().unwrap_or(0);
    let mut table = ProfileTable {
        tau,
        budget,
        solvers: solvers.clone(),
        problems: problems.iter().map(|(n, _)| n.clone()).collect(),
        pi: Vec::new(),
        f_x0: Vec::new(),
        f_u: Vec::new(),
    };
    for (name, traces) in problems {
        let by_solver: Vec<Vec<&SolverTrace>> = solvers.iter().map(|s| traces.iter().filter(|t| &t.solver == s).collect()).collect();
        let mut seeds: Option<Vec<u64>> = None;
        for (s, group) in by_solver.iter().enumerate() {
            let mut mine: Vec<u64> = group.iter().map(|t| t.seed).collect();
            mine.sort_unstable();
            if mine.is_empty() {
                return Err(Error::InvalidArgument(format!("{name}: no runs for solver {}", solvers[s])));
            }
            match &seeds {
                None => seeds = Some(mine),
                Some(first) if *first != mine => {
                    return Err(Error::InvalidArgument(format!("{name}: solver {} ran seeds {mine:?}, expected {first:?}", solvers[s])));
                }
                Some(_) => {}
            }
        }
        let f_x0 = median(&by_solver[0].iter().map(|t| t.init_best).collect::<Vec<_>>());
        let medians: Vec<Vec<f64>> = by_solver
            .iter()
            .map(|group| (1..=budget).map(|t| median(&group.iter().map(|tr| tr.recommended_at(t)).collect::<Vec<_>>())).collect())
            .collect();
        let f_u = medians.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let row = medians.iter().map(|m| m.iter().position(|v| perf_test(*v, f_x0, f_u, tau)).map(|i| i + 1)).collect();
        table.pi.push(row);
        table.f_x0.push(f_x0);
        table.f_u.push(f_u);
    }
    Ok(table)
}

/// Profiles over records of several problems; `problems` must cover every record's problem name.
pub fn build_profiles(problems: &[CompositeProblem], records: &[RunRecord], tau: f64, rho: f64) -> Result<ProfileTable> {
    let mut grouped: Vec<(String, Vec<SolverTrace>)> = Vec::new();
    for r in records {
        let p = problems
            .iter()
            .find(|p| p.name == r.summary.problem)
            .ok_or_else(|| Error::InvalidArgument(format!("no problem definition for {}", r.summary.problem)))?;
        let tr = SolverTrace::from_record(p, r, rho)?;
        match grouped.iter_mut().find(|(n, _)| *n == p.name) {
            Some((_, v)) => v.push(tr),
            None => grouped.push((p.name.clone(), vec![tr])),
        }
    }
    profiles_from_traces(&grouped, tau)
}
