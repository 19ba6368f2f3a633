//! The optimization loop shared by CUQB and the baselines, and its record.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::acqopt::{maximize_penalized, MultiStartConfig, Surface};
use crate::acquisition::{eic, eic_cf, epbo, incumbent, EicCfConfig};
use crate::cuqb::{check_infeasibility, cuqb_step, find_rho, initial_design, naive_recommend, recommend, recommendation_score, CuqbConfig};
use crate::error::{Error, Result};
use crate::gp::{Dataset, FitOptions, GpSurrogate};
use crate::problems::CompositeProblem;
use crate::quantile::BaseSamples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Cuqb,
    Eic,
    EicCf,
    Epbo,
    Random,
}

impl Solver {
    pub const ALL: [Solver; 5] = [Solver::Cuqb, Solver::Eic, Solver::EicCf, Solver::Epbo, Solver::Random];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Cuqb => "cuqb",
            Solver::Eic => "eic",
            Solver::EicCf => "eic-cf",
            Solver::Epbo => "epbo",
            Solver::Random => "random",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown solver '{s}', expected one of cuqb, eic, eic-cf, epbo, random")))
    }
}

/// One black-box evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based evaluation count.
    pub t: usize,
    pub x: Vec<f64>,
    /// Observed black-box output, noise included.
    pub y: Vec<f64>,
    /// Acquisition value at `x`; absent for the initial design and random search.
    pub acq_value: Option<f64>,
    /// Set on the last record of a run stopped by the infeasibility check.
    pub infeasible_flag: bool,
    /// 1-based index of the recommended evaluation after this one.
    pub rec_index: usize,
    pub rec_x: Vec<f64>,
    /// 1-based index of the best noisy observation after this one.
    pub naive_index: usize,
    /// Penalized lower-bound score of `x` (CUQB only).
    pub rec_score: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    InfeasibleDeclared { iteration: usize, constraint: usize },
    Failed { iteration: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: Solver,
    pub problem: String,
    pub seed: u64,
    pub status: RunStatus,
    pub config_hash: String,
    pub rho: f64,
    pub init_budget: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub summary: RunSummary,
    pub config: CuqbConfig,
    pub iterations: Vec<IterationRecord>,
}

impl RunRecord {
    /// Recommended point after the last evaluation.
    pub fn recommended(&self) -> Option<&[f64]> {
        self.iterations.last().map(|r| r.rec_x.as_slice())
    }

    /// Best noisy observation after the last evaluation.
    pub fn naive_recommended(&self) -> Option<&[f64]> {
        self.iterations.last().map(|r| self.iterations[r.naive_index - 1].x.as_slice())
    }

    /// Recommended point after `t` evaluations.
    pub fn recommended_at(&self, t: usize) -> Option<&[f64]> {
        self.iterations.get(t.checked_sub(1)?).map(|r| r.rec_x.as_slice())
    }
}

/// Short digest of a solver, problem and configuration.
pub fn config_hash(solver: Solver, problem: &str, cfg: &CuqbConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(format!("{solver}|{problem}|{json}").as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct EicSurface<'a> {
    model: &'a GpSurrogate,
    incumbent: f64,
}

impl Surface for EicSurface<'_> {
    fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.model.posterior_batch(xs)?.iter().map(|p| eic(p, None, self.incumbent).0).collect())
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (p, g) = self.model.posterior_with_gradients(x)?;
        let (v, grad) = eic(&p, Some(&g), self.incumbent);
        Ok((v, grad.expect("gradient requested")))
    }
}

struct EpboSurface<'a> {
    model: &'a GpSurrogate,
    rho: f64,
    beta_sqrt: f64,
}

impl Surface for EpboSurface<'_> {
    fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.model.posterior_batch(xs)?.iter().map(|p| epbo(p, None, self.rho, self.beta_sqrt).0).collect())
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (p, g) = self.model.posterior_with_gradients(x)?;
        let (v, grad) = epbo(&p, Some(&g), self.rho, self.beta_sqrt);
        Ok((v, grad.expect("gradient requested")))
    }
}

struct EicCfSurface<'a> {
    problem: &'a CompositeProblem,
    model: &'a GpSurrogate,
    z: &'a BaseSamples,
    incumbent: f64,
    cfg: EicCfConfig,
}

impl Surface for EicCfSurface<'_> {
    fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let posts = self.model.posterior_batch(xs)?;
        xs.iter().zip(&posts).map(|(x, p)| eic_cf(self.problem, x, p, None, self.z, self.incumbent, &self.cfg).map(|r| r.0)).collect()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (p, g) = self.model.posterior_with_gradients(x)?;
        let (v, grad) = eic_cf(self.problem, x, &p, Some(&g), self.z, self.incumbent, &self.cfg)?;
        Ok((v, grad.expect("gradient requested")))
    }
}

struct Loop<'a> {
    solver: Solver,
    problem: &'a CompositeProblem,
    cfg: &'a CuqbConfig,
    rho: f64,
    /// Inputs with noisy black-box outputs.
    data: Dataset,
    /// Noisy composite values `g_i(x_t, y_t)` per evaluation.
    observed: Vec<Vec<f64>>,
    scores: Vec<f64>,
    records: Vec<IterationRecord>,
    noise: ChaCha8Rng,
    clock: Instant,
}

impl Loop<'_> {
    fn observe(&mut self, x: Vec<f64>, acq_value: Option<f64>, score: Option<f64>) -> Result<()> {
        let mut y = self.problem.h(&x)?;
        if self.cfg.noise_std > 0.0 {
            for v in &mut y {
                *v += self.cfg.noise_std * self.noise.sample::<f64, _>(StandardNormal);
            }
        }
        self.observed.push(self.problem.compose(&x, &y));
        self.data.push(x.clone(), y.clone());
        if let Some(s) = score {
            self.scores.push(s);
        }
        self.push_record(x, y, acq_value, score);
        Ok(())
    }

    fn push_record(&mut self, x: Vec<f64>, y: Vec<f64>, acq_value: Option<f64>, score: Option<f64>) {
        let naive = naive_recommend(&self.observed, self.rho).expect("at least one observation");
        let rec = if self.solver == Solver::Cuqb && self.scores.len() == self.observed.len() {
            recommend(&self.scores).expect("at least one score")
        } else {
            naive
        };
        let rec_x = if rec + 1 == self.observed.len() { x.clone() } else { self.records[rec].x.clone() };
        let elapsed_ms = self.clock.elapsed().as_secs_f64() * 1e3;
        self.clock = Instant::now();
        self.records.push(IterationRecord {
            t: self.observed.len(),
            x,
            y,
            acq_value,
            infeasible_flag: false,
            rec_index: rec + 1,
            rec_x,
            naive_index: naive + 1,
            rec_score: score,
            elapsed_ms,
        });
    }

    fn training_set(&self) -> Dataset {
        match self.solver {
            Solver::Eic | Solver::Epbo => {
                let mut d = Dataset::new();
                for (x, f) in self.data.inputs.iter().zip(&self.observed) {
                    d.push(x.clone(), f.clone());
                }
                d
            }
            _ => self.data.clone(),
        }
    }

    fn fit(&self, previous: Option<&GpSurrogate>, t: usize) -> Result<GpSurrogate> {
        let data = self.training_set();
        let seed = mix(self.cfg.seed, 0x6770 + t as u64);
        if let Some(prev) = previous {
            let restarts = usize::from(self.cfg.gp_restart_every > 0 && t % self.cfg.gp_restart_every == 0);
            let warm = FitOptions { restarts, seed, warm_start: Some(prev.log_params()), max_iters: 100 };
            if let Ok(m) = GpSurrogate::fit_with(&data, &self.problem.bounds, &warm) {
                return Ok(m);
            }
        }
        let cold = FitOptions { restarts: self.cfg.gp_restarts, seed, warm_start: previous.map(GpSurrogate::log_params), max_iters: 100 };
        GpSurrogate::fit_with(&data, &self.problem.bounds, &cold)
    }
}

/// Runs `solver` on `problem`. Evaluation and model failures end the run with
/// a `Failed` status and the evaluations made so far.
pub fn run_solver(solver: Solver, problem: &CompositeProblem, cfg: &CuqbConfig) -> Result<RunRecord> {
    cfg.validate(problem.d())?;
    let t0 = cfg.init_budget_for(problem.d());
    let mut lp = Loop {
        solver,
        problem,
        cfg,
        rho: cfg.rho,
        data: Dataset::new(),
        observed: Vec::new(),
        scores: Vec::new(),
        records: Vec::new(),
        noise: stream(cfg.seed, 2),
        clock: Instant::now(),
    };
    let status = match drive(&mut lp, t0) {
        Ok(s) => s,
        Err(e) => RunStatus::Failed { iteration: lp.records.len(), message: e.to_string() },
    };
    if let RunStatus::InfeasibleDeclared { .. } = status {
        if let Some(last) = lp.records.last_mut() {
            last.infeasible_flag = true;
        }
    }
    Ok(RunRecord {
        summary: RunSummary {
            solver,
            problem: problem.name.clone(),
            seed: cfg.seed,
            status,
            config_hash: config_hash(solver, &problem.name, cfg),
            rho: lp.rho,
            init_budget: t0,
            evaluations: lp.records.len(),
        },
        config: cfg.clone(),
        iterations: lp.records,
    })
}

fn drive(lp: &mut Loop<'_>, t0: usize) -> Result<RunStatus> {
    let (problem, cfg, solver) = (lp.problem, lp.cfg, lp.solver);
    let l = cfg.quantile.mc_samples;
    let m = problem.m();
    let z_eval = BaseSamples::draw(l, m, &mut stream(cfg.seed, 5));
    let mut z_rng = stream(cfg.seed, 3);
    let mut uniform = stream(cfg.seed, 4);

    for x in initial_design(&problem.bounds, t0, cfg.seed) {
        lp.observe(x, None, None)?;
    }
    let mut model = if solver == Solver::Random { None } else { Some(lp.fit(None, t0)?) };

    if solver == Solver::Cuqb {
        let model = model.as_ref().expect("model");
        if cfg.find_rho {
            let ms = MultiStartConfig { seed: mix(cfg.multistart.seed, cfg.seed), ..cfg.multistart.clone() };
            lp.rho = find_rho(model, problem, cfg, &z_eval, &ms, 1e8, 1e-9)?.unwrap_or(cfg.rho);
        }
        for i in 0..t0 {
            let snapshot = model.conditioned_on_prefix(i)?;
            let s = recommendation_score(&snapshot, problem, cfg, &z_eval, i, lp.rho, &lp.data.inputs[i])?;
            lp.scores.push(s);
            lp.records[i].rec_score = Some(s);
        }
        let last = lp.records.len() - 1;
        let rec = recommend(&lp.scores).expect("scores");
        lp.records[last].rec_index = rec + 1;
        lp.records[last].rec_x = lp.data.inputs[rec].clone();
    }

    for t in t0..cfg.total_budget {
        let ms = MultiStartConfig { seed: mix(cfg.multistart.seed ^ cfg.seed, t as u64), ..cfg.multistart.clone() };
        let (x, acq, score) = match solver {
            Solver::Random => {
                let b = &problem.bounds;
                let x = b.lower.iter().zip(&b.upper).map(|(lo, hi)| if hi > lo { uniform.random_range(*lo..*hi) } else { *lo }).collect();
                (x, None, None)
            }
            Solver::Cuqb => {
                let model = model.as_ref().expect("model");
                let z = BaseSamples::draw(l, m, &mut z_rng);
                if cfg.infeasibility_check {
                    if let Some(i) = check_infeasibility(model, problem, cfg, &z, t, &ms)? {
                        return Ok(RunStatus::InfeasibleDeclared { iteration: t, constraint: i });
                    }
                }
                let (x, v) = cuqb_step(model, problem, cfg, &z, t, lp.rho, &ms)?;
                let s = recommendation_score(model, problem, cfg, &z_eval, t, lp.rho, &x)?;
                (x, Some(v), Some(s))
            }
            Solver::Eic => {
                let surface = EicSurface { model: model.as_ref().expect("model"), incumbent: incumbent(&lp.observed) };
                let out = maximize_penalized(&surface, &problem.bounds, &ms)?;
                (out.x, Some(out.value), None)
            }
            Solver::Epbo => {
                let (_, pu) = cfg.quantile.levels(t, problem.n());
                let beta_sqrt = Normal::standard().inverse_cdf(pu);
                let surface = EpboSurface { model: model.as_ref().expect("model"), rho: lp.rho, beta_sqrt };
                let out = maximize_penalized(&surface, &problem.bounds, &ms)?;
                (out.x, Some(out.value), None)
            }
            Solver::EicCf => {
                let z = BaseSamples::draw(l, m, &mut z_rng);
                let surface = EicCfSurface {
                    problem,
                    model: model.as_ref().expect("model"),
                    z: &z,
                    incumbent: incumbent(&lp.observed),
                    cfg: EicCfConfig::from_observations(&lp.observed),
                };
                let out = maximize_penalized(&surface, &problem.bounds, &ms)?;
                (out.x, Some(out.value), None)
            }
        };
        lp.observe(x, acq, score)?;
        if solver != Solver::Random && t + 1 < cfg.total_budget {
            model = Some(lp.fit(model.as_ref(), t + 1)?);
        }
    }
    Ok(RunStatus::Completed)
}
