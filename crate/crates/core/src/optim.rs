//! Projected limited-memory BFGS for box-constrained minimization.
//!
//! Iterates stay inside the box. Variables sitting on a bound whose gradient
//! points outward are frozen for the current direction; the remaining ones
//! follow the two-loop quasi-Newton direction. Steps use Armijo backtracking
//! along the projected path.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub grad_tol: f64,
    /// Stop when the infinity norm of an accepted step falls below this.
    pub step_tol: f64,
    /// Relative objective decrease below which the run is considered stalled.
    pub f_tol: f64,
    /// Infinity-norm length of the very first trial step.
    pub initial_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            memory: 8,
            grad_tol: 1e-6,
            step_tol: 1e-6,
            f_tol: 1e-12,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| xi - (xi - gi).clamp(l, h))
        .collect()
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`.
///
/// `f` returns the value and gradient. Evaluation errors or non-finite values
/// during a line search shrink the step; at the starting point they are fatal.
pub fn minimize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: lo.len().min(hi.len()) });
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
        return Err(Error::InvalidArgument("lower bound exceeds upper bound".into()));
    }
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut evals = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimizer(format!("non-finite objective at the starting point: {fx}")));
    }

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut converged = false;
    let mut iters = 0;

    while iters < opts.max_iters {
        let pg = projected_gradient(&x, &g, lo, hi);
        if inf_norm(&pg) < opts.grad_tol {
            converged = true;
            break;
        }
        iters += 1;

        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let mask = |v: &mut Vec<f64>| {
            for (vi, &fr) in v.iter_mut().zip(&free) {
                if !fr {
                    *vi = 0.0;
                }
            }
        };

        // two-loop recursion
        let mut q = g.clone();
        mask(&mut q);
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        mask(&mut dir);
        if dot(&dir, &g) >= 0.0 || dir.iter().any(|v| !v.is_finite()) {
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            mask(&mut dir);
        }
        if pairs.is_empty() {
            let norm = inf_norm(&dir);
            if norm > 0.0 {
                let scale = opts.initial_step / norm;
                dir.iter_mut().for_each(|v| *v *= scale);
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lo, hi);
            let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if inf_norm(&s) == 0.0 {
                break;
            }
            evals += 1;
            if let Ok((ft, gt)) = f(&trial) {
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= fx + 1e-4 * dot(&g, &s)
                {
                    accepted = Some((trial, ft, gt, s));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew, s)) = accepted else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };

        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s.clone(), y, 1.0 / sy));
        }
        let decrease = fx - fnew;
        x = xn;
        fx = fnew;
        g = gnew;
        if inf_norm(&s) < opts.step_tol || decrease <= opts.f_tol * fx.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(LbfgsOutcome { x, f: fx, iters, evals, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let opts = LbfgsOptions { max_iters: 500, f_tol: 0.0, step_tol: 1e-12, grad_tol: 1e-8, ..Default::default() };
        let r = minimize_box(rosen, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn active_bound_is_respected() {
        let opts = LbfgsOptions::default();
        let quad = |x: &[f64]| Ok(((x[0] - 3.0).powi(2) + (x[1] + 0.5).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 0.5)]));
        let r = minimize_box(quad, &[0.2, 0.2], &[0.0, 0.0], &[1.0, 1.0], &opts).unwrap();
        assert_eq!(r.x, vec![1.0, 0.0]);
        assert!(r.converged);
    }

    #[test]
    fn fatal_start_is_reported() {
        let bad = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(minimize_box(bad, &[0.0], &[0.0], &[1.0], &LbfgsOptions::default()).is_err());
    }

    #[test]
    fn failing_region_is_avoided() {
        // evaluations beyond 0.5 fail; the optimum of the feasible part is at the edge
        let f = |x: &[f64]| {
            if x[0] > 0.5 {
                Err(Error::Evaluation("out of range".into()))
            } else {
                Ok((-x[0], vec![-1.0]))
            }
        };
        let r = minimize_box(f, &[0.0], &[0.0], &[1.0], &LbfgsOptions { max_iters: 100, ..Default::default() }).unwrap();
        assert!(r.x[0] <= 0.5 && r.x[0] > 0.45, "{:?}", r.x);
    }
}
