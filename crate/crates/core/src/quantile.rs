//! Quantile bounds on composite predictions `g_i(x, Y)` with `Y ~ N(mu(x), Sigma(x))`.
//!
//! Outer functions that are affine in `y` use the exact Gaussian quantile of
//! `a(x) . Y + b(x)`. Everything else is estimated from `L` whitened sample
//! paths `mu + C z_l` with a fixed base draw `z` (common random numbers), and
//! the order statistic is taken through the soft sort so the estimate is
//! differentiable in `x`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::gp::{GpSurrogate, PosteriorGradients, PosteriorMoments};
use crate::outer::CompositeOuter;
use crate::problems::CompositeProblem;
use crate::softsort::empirical_quantile;

/// Probability-level schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Schedule {
    /// Upper level `alpha`, lower level `1 - alpha`.
    Constant,
    /// Levels `1 - a_t / 2` and `a_t / 2` with
    /// `a_t = 6 delta / (pi^2 (t+1)^2 (n+1) |X|)`.
    Theoretical { delta: f64, cardinality: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub mc_samples: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub schedule: Schedule,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        Self { mc_samples: 50, epsilon: 0.1, alpha: 0.95, schedule: Schedule::Constant }
    }
}

impl QuantileConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 {
            return invalid("mc_samples must be positive");
        }
        if !(self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Schedule::Theoretical { delta, cardinality } = self.schedule {
            if !(delta > 0.0 && delta < 1.0) {
                return invalid(format!("delta must lie in (0, 1), got {delta}"));
            }
            if !(cardinality >= 1.0) {
                return invalid(format!("surrogate cardinality must be at least 1, got {cardinality}"));
            }
        }
        Ok(())
    }

    /// `(lower, upper)` probability levels at iteration `t` for a problem with `n` constraints.
    pub fn levels(&self, t: usize, n: usize) -> (f64, f64) {
        match self.schedule {
            Schedule::Constant => (1.0 - self.alpha, self.alpha),
            Schedule::Theoretical { delta, cardinality } => {
                let tp1 = (t + 1) as f64;
                let a = 6.0 * delta / (std::f64::consts::PI.powi(2) * tp1 * tp1 * (n + 1) as f64 * cardinality);
                (a / 2.0, 1.0 - a / 2.0)
            }
        }
    }
}

/// Which end of the predictive distribution to bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// Fixed `L x m` matrix of standard-normal draws, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSamples {
    rows: usize,
    cols: usize,
    z: Vec<f64>,
}

impl BaseSamples {
    pub fn draw<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let z = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self { rows, cols, z }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, z: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return invalid("ragged base-sample rows");
        }
        Ok(Self { rows: rows.len(), cols, z: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.z[l * self.cols..(l + 1) * self.cols]
    }
}

/// Rows `mu + C z_l` for a diagonal posterior factor.
pub fn sample_paths(post: &PosteriorMoments, z: &BaseSamples) -> Result<Vec<Vec<f64>>> {
    if z.cols() != post.mean.len() {
        return Err(Error::DimensionMismatch { expected: post.mean.len(), got: z.cols() });
    }
    let sd = post.std();
    Ok((0..z.rows())
        .map(|l| z.row(l).iter().zip(&post.mean).zip(&sd).map(|((zj, mu), s)| mu + s * zj).collect())
        .collect())
}

fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `mu + Phi^-1(p) sigma`, the level-`p` quantile of `N(mu, sigma^2)`.
pub fn linear_closed_form(mean: f64, std: f64, p: f64) -> f64 {
    mean + normal_quantile(p) * std
}

/// Level-`p` quantile of `g(x, Y)` and, when `grads` is given, its gradient in `x`.
pub fn composite_quantile(
    g: &CompositeOuter<'_>,
    x: &[f64],
    post: &PosteriorMoments,
    grads: Option<&PosteriorGradients>,
    z: &BaseSamples,
    p: f64,
    eps: f64,
) -> Result<(f64, Option<Vec<f64>>)> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("probability level must lie in (0, 1), got {p}"));
    }
    let m = post.mean.len();
    let d = x.len();
    let sd = post.std();

    if g.is_linear() {
        let Some(grads) = grads else {
            let (a, b) = g.linear_coeffs(x).expect("affine outer");
            let mu: f64 = a.iter().zip(&post.mean).map(|(a, m)| a * m).sum::<f64>() + b;
            let s = a.iter().zip(&post.var).map(|(a, v)| a * a * v).sum::<f64>().sqrt();
            return Ok((linear_closed_form(mu, s, p), None));
        };
        let lf = g.linear_form(x).expect("affine outer");
        let mu: f64 = lf.a.iter().zip(&post.mean).map(|(a, m)| a * m).sum::<f64>() + lf.b;
        let s = lf.a.iter().zip(&post.var).map(|(a, v)| a * a * v).sum::<f64>().sqrt();
        let beta = normal_quantile(p);
        let mut grad = lf.db.clone();
        for k in 0..d {
            let mut dmu = 0.0;
            let mut dvar_half = 0.0;
            for j in 0..m {
                dmu += lf.da[j][k] * post.mean[j] + lf.a[j] * grads.dmean[j][k];
                dvar_half += lf.a[j] * lf.da[j][k] * post.var[j] + lf.a[j] * lf.a[j] * sd[j] * grads.dstd[j][k];
            }
            grad[k] += dmu + if s > 0.0 { beta * dvar_half / s } else { 0.0 };
        }
        return Ok((mu + beta * s, Some(grad)));
    }

    if post.var.iter().all(|v| *v == 0.0) {
        let value = g.eval(x, &post.mean);
        let grad = grads.map(|gr| {
            let og = g.grad(x, &post.mean);
            (0..d).map(|k| og.grad_x[k] + (0..m).map(|j| og.grad_y[j] * gr.dmean[j][k]).sum::<f64>()).collect()
        });
        return Ok((value, grad));
    }

    let paths = sample_paths(post, z)?;
    let values: Vec<f64> = paths.iter().map(|y| g.eval(x, y)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("outer function {} is not finite on sample path {i}", g.index())));
    }
    let est = empirical_quantile(&values, p, eps)?;
    let grad = grads.map(|gr| {
        let mut out = vec![0.0; d];
        for (l, w) in &est.weights {
            let og = g.grad(x, &paths[*l]);
            let zl = z.row(*l);
            for k in 0..d {
                let mut dv = og.grad_x[k];
                for j in 0..m {
                    dv += og.grad_y[j] * (gr.dmean[j][k] + zl[j] * gr.dstd[j][k]);
                }
                out[k] += w * dv;
            }
        }
        out
    });
    Ok((est.value, grad))
}

fn bound(
    side: Side,
    g: &CompositeOuter<'_>,
    x: &[f64],
    post: &PosteriorMoments,
    grads: Option<&PosteriorGradients>,
    cfg: &QuantileConfig,
    z: &BaseSamples,
    t: usize,
    n: usize,
) -> Result<(f64, Option<Vec<f64>>)> {
    let (pl, pu) = cfg.levels(t, n);
    let p = if side == Side::Upper { pu } else { pl };
    composite_quantile(g, x, post, grads, z, p, cfg.epsilon)
}

/// Upper quantile bound `u_{i,t}(x)`.
#[allow(clippy::too_many_arguments)]
pub fn upper_quantile(
    g: &CompositeOuter<'_>,
    x: &[f64],
    post: &PosteriorMoments,
    grads: Option<&PosteriorGradients>,
    cfg: &QuantileConfig,
    z: &BaseSamples,
    t: usize,
    n: usize,
) -> Result<(f64, Option<Vec<f64>>)> {
    bound(Side::Upper, g, x, post, grads, cfg, z, t, n)
}

/// Lower quantile bound `l_{i,t}(x)`.
#[allow(clippy::too_many_arguments)]
pub fn lower_quantile(
    g: &CompositeOuter<'_>,
    x: &[f64],
    post: &PosteriorMoments,
    grads: Option<&PosteriorGradients>,
    cfg: &QuantileConfig,
    z: &BaseSamples,
    t: usize,
    n: usize,
) -> Result<(f64, Option<Vec<f64>>)> {
    bound(Side::Lower, g, x, post, grads, cfg, z, t, n)
}

/// All quantile bounds of one problem under one model snapshot and base draw.
#[derive(Debug, Clone, Copy)]
pub struct QuantileBounds<'a> {
    pub problem: &'a CompositeProblem,
    pub model: &'a GpSurrogate,
    pub cfg: &'a QuantileConfig,
    pub z: &'a BaseSamples,
    pub t: usize,
}

impl<'a> QuantileBounds<'a> {
    fn level(&self, side: Side) -> f64 {
        let (pl, pu) = self.cfg.levels(self.t, self.problem.n());
        if side == Side::Upper {
            pu
        } else {
            pl
        }
    }

    /// Bounds for the outer functions in `which` at one point.
    pub fn at(&self, x: &[f64], side: Side, which: &[usize]) -> Result<Vec<f64>> {
        let post = self.model.posterior(x)?;
        self.from_posterior(x, &post, side, which)
    }

    fn from_posterior(&self, x: &[f64], post: &PosteriorMoments, side: Side, which: &[usize]) -> Result<Vec<f64>> {
        let p = self.level(side);
        which
            .iter()
            .map(|&i| composite_quantile(&self.problem.outer(i), x, post, None, self.z, p, self.cfg.epsilon).map(|r| r.0))
            .collect()
    }

    /// Bounds and gradients for the outer functions in `which` at one point.
    pub fn with_gradients(&self, x: &[f64], side: Side, which: &[usize]) -> Result<Vec<(f64, Vec<f64>)>> {
        let (post, grads) = self.model.posterior_with_gradients(x)?;
        let p = self.level(side);
        which
            .iter()
            .map(|&i| {
                composite_quantile(&self.problem.outer(i), x, &post, Some(&grads), self.z, p, self.cfg.epsilon)
                    .map(|(v, g)| (v, g.expect("gradient requested")))
            })
            .collect()
    }

    /// Bounds at many points, sharing one batched posterior evaluation.
    pub fn batch(&self, xs: &[Vec<f64>], side: Side, which: &[usize]) -> Result<Vec<Vec<f64>>> {
        let posts = self.model.posterior_batch(xs)?;
        xs.iter().zip(&posts).map(|(x, post)| self.from_posterior(x, post, side, which)).collect()
    }
}
