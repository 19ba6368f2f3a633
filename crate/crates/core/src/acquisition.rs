//! Baseline acquisition functions.
//!
//! [`eic`] and [`epbo`] model every `f_i` directly with an independent GP, so
//! they see `n + 1` scalar outputs and ignore the composite structure.
//! [`eic_cf`] works on the black-box posterior and pushes whitened sample paths
//! through the known outer functions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gp::{PosteriorGradients, PosteriorMoments};
use crate::problems::CompositeProblem;
use crate::quantile::{sample_paths, BaseSamples};

fn std_normal() -> Normal {
    Normal::standard()
}

/// Expected improvement of `N(mu, sigma^2)` over `incumbent`.
pub fn expected_improvement(mu: f64, sigma: f64, incumbent: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - incumbent).max(0.0);
    }
    let n = std_normal();
    let u = (mu - incumbent) / sigma;
    (mu - incumbent) * n.cdf(u) + sigma * n.pdf(u)
}

/// Best feasible objective among rows `[f_0, f_1, ..., f_n]`, or
/// `min f_0 - 1` when none is feasible.
pub fn incumbent(rows: &[Vec<f64>]) -> f64 {
    let feasible = rows.iter().filter(|r| r[1..].iter().all(|v| *v >= 0.0)).map(|r| r[0]);
    match feasible.reduce(f64::max) {
        Some(v) => v,
        None => rows.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min) - 1.0,
    }
}

/// Expected improvement with constraints on a posterior over `(f_0, ..., f_n)`.
pub fn eic(post: &PosteriorMoments, grads: Option<&PosteriorGradients>, incumbent: f64) -> (f64, Option<Vec<f64>>) {
    let n = std_normal();
    let sd = post.std();
    let k = post.mean.len();
    let ei = expected_improvement(post.mean[0], sd[0], incumbent);
    let mut factors = Vec::with_capacity(k - 1);
    for i in 1..k {
        factors.push(if sd[i] > 0.0 {
            n.cdf(post.mean[i] / sd[i])
        } else if post.mean[i] >= 0.0 {
            1.0
        } else {
            0.0
        });
    }
    let prod: f64 = factors.iter().product();
    let value = ei * prod;
    let grad = grads.map(|gr| {
        let d = gr.dmean[0].len();
        let mut out = vec![0.0; d];
        let (dei_dmu, dei_dsd) = if sd[0] > 0.0 {
            let u = (post.mean[0] - incumbent) / sd[0];
            (n.cdf(u), n.pdf(u))
        } else {
            (if post.mean[0] > incumbent { 1.0 } else { 0.0 }, 0.0)
        };
        for (c, o) in out.iter_mut().enumerate() {
            *o = (dei_dmu * gr.dmean[0][c] + dei_dsd * gr.dstd[0][c]) * prod;
        }
        for i in 1..k {
            if sd[i] <= 0.0 {
                continue;
            }
            let u = post.mean[i] / sd[i];
            let others: f64 = factors.iter().enumerate().filter(|(j, _)| *j != i - 1).map(|(_, f)| f).product();
            let phi = n.pdf(u);
            for (c, o) in out.iter_mut().enumerate() {
                let du = gr.dmean[i][c] / sd[i] - post.mean[i] * gr.dstd[i][c] / (sd[i] * sd[i]);
                *o += ei * others * phi * du;
            }
        }
        out
    });
    (value, grad)
}

/// Upper confidence bound of every output minus a hinge penalty on the constraints.
pub fn epbo(post: &PosteriorMoments, grads: Option<&PosteriorGradients>, rho: f64, beta_sqrt: f64) -> (f64, Option<Vec<f64>>) {
    let sd = post.std();
    let ucb: Vec<f64> = post.mean.iter().zip(&sd).map(|(m, s)| m + beta_sqrt * s).collect();
    let value = ucb[0] - rho * ucb[1..].iter().map(|u| (-u).max(0.0)).sum::<f64>();
    let grad = grads.map(|gr| {
        let d = gr.dmean[0].len();
        (0..d)
            .map(|c| {
                let mut g = gr.dmean[0][c] + beta_sqrt * gr.dstd[0][c];
                for i in 1..ucb.len() {
                    if ucb[i] < 0.0 {
                        g += rho * (gr.dmean[i][c] + beta_sqrt * gr.dstd[i][c]);
                    }
                }
                g
            })
            .collect()
    });
    (value, grad)
}

/// Smoothing parameters for [`eic_cf`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EicCfConfig {
    /// Sigmoid temperature on scaled constraint samples.
    pub kappa: f64,
    /// Softplus temperature on the scaled improvement.
    pub kappa_plus: f64,
    /// Min-max scale of each outer function, objective first.
    pub scales: Vec<f64>,
}

impl EicCfConfig {
    /// Temperatures 100 with scales set to the observed range of each `g_i`.
    pub fn from_observations(rows: &[Vec<f64>]) -> Self {
        let k = rows.first().map_or(1, Vec::len);
        let scales = (0..k)
            .map(|i| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r[i]), h.max(r[i])));
                if hi > lo {
                    hi - lo
                } else {
                    1.0
                }
            })
            .collect();
        Self { kappa: 100.0, kappa_plus: 100.0, scales }
    }
}

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Monte-Carlo expected improvement with constraints on composite predictions.
#[allow(clippy::too_many_arguments)]
pub fn eic_cf(
    problem: &CompositeProblem,
    x: &[f64],
    post: &PosteriorMoments,
    grads: Option<&PosteriorGradients>,
    z: &BaseSamples,
    incumbent: f64,
    cfg: &EicCfConfig,
) -> Result<(f64, Option<Vec<f64>>)> {
    let k = problem.n() + 1;
    if cfg.scales.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: cfg.scales.len() });
    }
    let d = x.len();
    let m = post.mean.len();
    let paths = sample_paths(post, z)?;
    let l = paths.len() as f64;
    let mut value = 0.0;
    let mut grad = grads.map(|_| vec![0.0; d]);
    for (li, y) in paths.iter().enumerate() {
        let s0 = cfg.scales[0];
        let u0 = cfg.kappa_plus * (problem.outer(0).eval(x, y) - incumbent) / s0;
        let imp = s0 / cfg.kappa_plus * softplus(u0);
        let mut feas = Vec::with_capacity(k - 1);
        for i in 1..k {
            feas.push(sigmoid(cfg.kappa * problem.outer(i).eval(x, y) / cfg.scales[i]));
        }
        let prod: f64 = feas.iter().product();
        value += imp * prod / l;
        if let (Some(gr), Some(out)) = (grads, grad.as_mut()) {
            let zl = z.row(li);
            let total_dx = |g: &crate::outer::OuterGrad| -> Vec<f64> {
                (0..d)
                    .map(|c| g.grad_x[c] + (0..m).map(|j| g.grad_y[j] * (gr.dmean[j][c] + zl[j] * gr.dstd[j][c])).sum::<f64>())
                    .collect()
            };
            let g0 = total_dx(&problem.outer(0).grad(x, y));
            let dimp = sigmoid(u0);
            for c in 0..d {
                out[c] += dimp * g0[c] * prod / l;
            }
            for i in 1..k {
                let gi = total_dx(&problem.outer(i).grad(x, y));
                let s = feas[i - 1];
                let others: f64 = feas.iter().enumerate().filter(|(j, _)| *j != i - 1).map(|(_, f)| f).product();
                let ds = s * (1.0 - s) * cfg.kappa / cfg.scales[i];
                for c in 0..d {
                    out[c] += imp * others * ds * gi[c] / l;
                }
            }
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Dataset, GpSurrogate, KernelHyper};
    use crate::outer::Real;
    use crate::problems::KnownOptimum;
    use crate::quantile::{composite_quantile, linear_closed_form};
    use crate::space::Bounds;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn pm(mean: Vec<f64>, var: Vec<f64>) -> PosteriorMoments {
        PosteriorMoments { mean, var }
    }

    #[test]
    fn eic_zero_variance_below_incumbent() {
        let (v, _) = eic(&pm(vec![1.0, 2.0], vec![0.0, 0.0]), None, 3.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ei_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = std_normal();
        for _ in 0..10 {
            let mu: f64 = rng.random_range(-2.0..2.0);
            let sigma: f64 = rng.random_range(0.1..2.0);
            let inc: f64 = rng.random_range(-2.0..2.0);
            let steps = 400_000;
            let (a, b) = (-12.0, 12.0);
            let h = (b - a) / steps as f64;
            let f = |z: f64| (mu + sigma * z - inc).max(0.0) * n.pdf(z);
            let mut q = 0.5 * (f(a) + f(b));
            for s in 1..steps {
                q += f(a + s as f64 * h);
            }
            q *= h;
            let (v, _) = eic(&pm(vec![mu], vec![sigma * sigma]), None, inc);
            assert!((v - q).abs() < 1e-6, "{v} vs {q}");
        }
    }

    #[test]
    fn centred_constraint_halves_the_value() {
        let (plain, _) = eic(&pm(vec![1.0], vec![1.0]), None, 0.5);
        let (con, _) = eic(&pm(vec![1.0, 0.0], vec![1.0, 2.0]), None, 0.5);
        assert!((con - 0.5 * plain).abs() < 1e-15);
    }

    #[test]
    fn incumbent_rules() {
        assert_eq!(incumbent(&[vec![1.0, 0.5], vec![3.0, -0.1], vec![2.0, 0.0]]), 2.0);
        assert_eq!(incumbent(&[vec![1.0, -0.5], vec![3.0, -0.1]]), 0.0);
    }

    #[test]
    fn epbo_reduces_to_ucb() {
        let (v, _) = epbo(&pm(vec![1.0], vec![4.0]), None, 1e5, 1.5);
        assert_eq!(v, 4.0);
        let (v, _) = epbo(&pm(vec![1.0, 0.5, -0.1], vec![4.0, 1.0, 1.0]), None, 1e5, 1.5);
        assert_eq!(v, 4.0);
        let (v, _) = epbo(&pm(vec![1.0, -2.0], vec![4.0, 1.0]), None, 10.0, 1.5);
        assert!((v - (4.0 - 5.0)).abs() < 1e-12);
    }

    fn id0<T: Real>(_x: &[T], y: &[T]) -> T {
        y[0]
    }
    fn id1<T: Real>(_x: &[T], y: &[T]) -> T {
        y[1]
    }
    fn id2<T: Real>(_x: &[T], y: &[T]) -> T {
        y[2]
    }

    fn identity_problem() -> CompositeProblem {
        CompositeProblem::new(
            "identity",
            Bounds::from_pairs(&[(0.0, 1.0)]).unwrap(),
            3,
            Arc::new(|x: &[f64]| Ok(vec![(5.0 * x[0]).sin(), x[0] - 0.3, 0.6 - x[0]])),
            vec![crate::outer!(id0, linear), crate::outer!(id1, linear), crate::outer!(id2, linear)],
            Some(KnownOptimum::computed(0.0, None, "test fixture")),
        )
        .unwrap()
    }

    #[test]
    fn epbo_equals_identity_penalized_quantile() {
        let p = identity_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = BaseSamples::draw(50, 3, &mut rng);
        let level = 0.9;
        let beta = statrs::distribution::Normal::standard().inverse_cdf(level);
        for _ in 0..20 {
            let mean: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let var: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.5)).collect();
            let post = pm(mean, var);
            let u: Vec<f64> = (0..3).map(|i| composite_quantile(&p.outer(i), &[0.5], &post, None, &z, level, 0.1).unwrap().0).collect();
            let pen = u[0] - 1e3 * (u[1].min(0.0).abs() + u[2].min(0.0).abs());
            let (v, _) = epbo(&post, None, 1e3, beta);
            assert!((v - pen).abs() < 1e-6 * pen.abs().max(1.0));
            assert!((u[0] - linear_closed_form(post.mean[0], post.std()[0], level)).abs() < 1e-12);
        }
    }

    fn sq_con<T: Real>(_x: &[T], y: &[T]) -> T {
        -(y[1] * y[1]) + 0.25
    }

    fn nonlinear_problem() -> CompositeProblem {
        CompositeProblem::new(
            "nl",
            Bounds::from_pairs(&[(0.0, 1.0)]).unwrap(),
            2,
            Arc::new(|x: &[f64]| Ok(vec![(5.0 * x[0]).sin(), x[0] - 0.3])),
            vec![crate::outer!(id0, linear), crate::outer!(sq_con)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn eic_cf_vanishes_when_every_path_is_infeasible() {
        let p = nonlinear_problem();
        let z = BaseSamples::draw(64, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let post = pm(vec![2.0, 10.0], vec![0.1, 0.01]);
        let cfg = EicCfConfig { kappa: 100.0, kappa_plus: 100.0, scales: vec![1.0, 1.0] };
        let (v, _) = eic_cf(&p, &[0.5], &post, None, &z, 0.0, &cfg).unwrap();
        assert!(v < 1e-6);
    }

    #[test]
    fn eic_cf_deterministic_improvement() {
        let p = CompositeProblem::new(
            "u",
            Bounds::from_pairs(&[(0.0, 1.0)]).unwrap(),
            1,
            Arc::new(|x: &[f64]| Ok(vec![x[0]])),
            vec![crate::outer!(id0, linear)],
            None,
        )
        .unwrap();
        let z = BaseSamples::draw(16, 1, &mut ChaCha8Rng::seed_from_u64(1));
        let post = pm(vec![1.7], vec![0.0]);
        let mut last = f64::INFINITY;
        for kp in [10.0, 100.0, 1000.0, 1e5] {
            let cfg = EicCfConfig { kappa: 100.0, kappa_plus: kp, scales: vec![1.0] };
            let (v, _) = eic_cf(&p, &[0.5], &post, None, &z, 1.2, &cfg).unwrap();
            assert!((v - 0.5).abs() <= (last - 0.5).abs() + 1e-15);
            last = v;
        }
        assert!((last - 0.5).abs() < 1e-9);
    }

    #[test]
    fn eic_cf_matches_exact_indicator_estimator() {
        let p = nonlinear_problem();
        let l = 200_000;
        let z = BaseSamples::draw(l, 2, &mut ChaCha8Rng::seed_from_u64(12));
        let post = pm(vec![0.4, 0.3], vec![0.3, 0.09]);
        let inc = 0.2;
        let cfg = EicCfConfig { kappa: 1000.0, kappa_plus: 1000.0, scales: vec![1.0, 1.0] };
        let (v, _) = eic_cf(&p, &[0.5], &post, None, &z, inc, &cfg).unwrap();
        let paths = sample_paths(&post, &z).unwrap();
        let exact: f64 = paths
            .iter()
            .map(|y| {
                let f = p.compose(&[0.5], y);
                if f[1] >= 0.0 {
                    (f[0] - inc).max(0.0)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / l as f64;
        assert!((v - exact).abs() < 0.02 * exact, "{v} vs {exact}");
    }

    fn fitted(p: &CompositeProblem, outputs: fn(&CompositeProblem, &[f64]) -> Vec<f64>) -> GpSurrogate {
        let mut data = Dataset::new();
        for i in 0..7 {
            let x = vec![i as f64 / 6.0];
            data.push(x.clone(), outputs(p, &x));
        }
        let k = data.n_outputs();
        let h = KernelHyper::new(vec![0.3], 1.0, 1e-6).unwrap();
        GpSurrogate::with_hyperparameters(&data, &p.bounds, &vec![h; k]).unwrap()
    }

    fn check_grad(f: impl Fn(&[f64], bool) -> (f64, Option<Vec<f64>>)) {
        for x0 in [0.11, 0.37, 0.52, 0.93] {
            let (_, g) = f(&[x0], true);
            let g = g.unwrap()[0];
            let h = 1e-6;
            let fd = (f(&[x0 + h], false).0 - f(&[x0 - h], false).0) / (2.0 * h);
            assert!((fd - g).abs() <= 1e-4 * fd.abs().max(1e-2), "x = {x0}: {g} vs {fd}");
        }
    }

    #[test]
    fn acquisition_gradients_match_finite_differences() {
        let p = nonlinear_problem();
        let on_f = fitted(&p, |p, x| p.evaluate(x).unwrap());
        let on_h = fitted(&p, |p, x| p.h(x).unwrap());
        check_grad(|x, g| {
            let (post, gr) = on_f.posterior_with_gradients(x).unwrap();
            eic(&post, g.then_some(&gr), 0.3)
        });
        check_grad(|x, g| {
            let (post, gr) = on_f.posterior_with_gradients(x).unwrap();
            epbo(&post, g.then_some(&gr), 10.0, 1.3)
        });
        let z = BaseSamples::draw(32, 2, &mut ChaCha8Rng::seed_from_u64(2));
        let cfg = EicCfConfig { kappa: 10.0, kappa_plus: 10.0, scales: vec![2.0, 0.5] };
        check_grad(|x, g| {
            let (post, gr) = on_h.posterior_with_gradients(x).unwrap();
            eic_cf(&p, x, &post, g.then_some(&gr), &z, 0.3, &cfg).unwrap()
        });
    }
}
