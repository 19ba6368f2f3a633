//! Multi-start maximization of acquisition surfaces over a box.
//!
//! A pool of scrambled Sobol candidates is scored in one batch, a few starts
//! are drawn from it with Boltzmann weights, the best candidate is always kept
//! as an extra start, and each start is polished with projected L-BFGS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::{minimize_box, LbfgsOptions};
use crate::space::Bounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartConfig {
    pub n_raw: usize,
    pub n_starts: usize,
    pub eta: f64,
    pub max_local_iters: usize,
    pub convergence_tol: f64,
    pub seed: u64,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        Self { n_raw: 8192, n_starts: 3, eta: 1.0, max_local_iters: 200, convergence_tol: 1e-6, seed: 0 }
    }
}

impl MultiStartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_raw == 0 || self.n_starts == 0 || self.n_starts > self.n_raw {
            return invalid(format!("need 0 < n_starts <= n_raw, got {} and {}", self.n_starts, self.n_raw));
        }
        if !(self.eta >= 0.0) || !(self.convergence_tol > 0.0) || self.max_local_iters == 0 {
            return invalid("eta must be non-negative and tolerances positive");
        }
        Ok(())
    }
}

/// A function to maximize, with a batched value-only path for screening.
pub trait Surface {
    fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>>;
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Wraps a closure returning value and gradient.
pub struct FnSurface<F>(pub F);

impl<F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>> Surface for FnSurface<F> {
    fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| (self.0)(x).map(|r| r.0)).collect()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        (self.0)(x)
    }
}

/// `n` Owen-scrambled Sobol points mapped into `bounds`.
pub fn sobol_candidates(bounds: &Bounds, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let s = (seed ^ (seed >> 32)) as u32;
    (0..n)
        .map(|i| {
            let u: Vec<f64> = (0..d).map(|k| sobol_burley::sample(i as u32, k as u32, s) as f64).collect();
            bounds.from_unit(&u)
        })
        .collect()
}

/// Draws `k` distinct indices with probability proportional to
/// `exp(eta (v_i - mean) / sd)`, sequentially without replacement.
pub fn boltzmann_select(values: &[f64], k: usize, eta: f64, seed: u64) -> Result<Vec<usize>> {
    if values.iter().any(|v| v.is_nan()) {
        return invalid("NaN acquisition value");
    }
    if k > values.len() {
        return invalid(format!("cannot select {k} of {} values", values.len()));
    }
    let n = values.len() as f64;
    let finite: Vec<f64> = values.iter().map(|v| if v.is_finite() { *v } else { f64::MIN / 4.0 }).collect();
    let mean = finite.iter().sum::<f64>() / n;
    let sd = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Gumbel-top-k is equivalent to sequential weighted sampling without replacement.
    let mut keys: Vec<(f64, usize)> = finite
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let logw = if sd > 0.0 && eta > 0.0 { eta * (v - mean) / sd } else { 0.0 };
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (logw - (-u.ln()).ln(), i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keys.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Result of [`maximize_penalized`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best screened candidate value.
    pub best_raw: f64,
    pub local_failures: usize,
}

/// Local ascent from one start in unit coordinates.
fn ascend<S: Surface>(surface: &S, bounds: &Bounds, x0: &[f64], cfg: &MultiStartConfig) -> Result<(Vec<f64>, f64)> {
    let w = bounds.scales();
    let d = bounds.dim();
    let u0 = bounds.to_unit(x0);
    let opts = LbfgsOptions {
        max_iters: cfg.max_local_iters,
        grad_tol: cfg.convergence_tol,
        step_tol: cfg.convergence_tol,
        initial_step: 0.05,
        ..Default::default()
    };
    let out = minimize_box(
        |u| {
            let x = bounds.from_unit(u);
            let (v, g) = surface.value_grad(&x)?;
            Ok((-v, g.iter().zip(&w).map(|(gi, wi)| -gi * wi).collect()))
        },
        &u0,
        &vec![0.0; d],
        &vec![1.0; d],
        &opts,
    )?;
    Ok((bounds.from_unit(&out.x), -out.f))
}

/// Maximizes `surface` over `bounds`.
pub fn maximize_penalized<S: Surface>(surface: &S, bounds: &Bounds, cfg: &MultiStartConfig) -> Result<MultiStartOutcome> {
    cfg.validate()?;
    let cands = sobol_candidates(bounds, cfg.n_raw, cfg.seed);
    let raw = surface.values(&cands)?;
    let scored: Vec<f64> = raw.iter().map(|v| if v.is_nan() { f64::NEG_INFINITY } else { *v }).collect();
    let best_idx = (0..scored.len()).max_by(|a, b| scored[*a].total_cmp(&scored[*b]).then(b.cmp(a))).expect("non-empty pool");
    let best_raw = scored[best_idx];
    if !best_raw.is_finite() {
        return Err(Error::Optimizer("no candidate has a finite acquisition value".into()));
    }
    let mut starts = vec![best_idx];
    for i in boltzmann_select(&scored, cfg.n_starts, cfg.eta, cfg.seed.wrapping_add(0x5EED))? {
        if !starts.contains(&i) && scored[i].is_finite() {
            starts.push(i);
        }
    }

    let mut best: (Vec<f64>, f64) = (cands[best_idx].clone(), best_raw);
    let mut failures = 0;
    let mut last_err = None;
    for &i in &starts {
        match ascend(surface, bounds, &cands[i], cfg) {
            Ok((x, v)) if v.is_finite() => {
                if v > best.1 {
                    best = (x, v);
                }
            }
            Ok(_) => failures += 1,
            Err(e) => {
                failures += 1;
                last_err = Some(e);
            }
        }
    }
    if failures == starts.len() {
        return Err(Error::Optimizer(format!(
            "all {} local starts failed; best screened value {best_raw}; last error: {}",
            starts.len(),
            last_err.map_or_else(|| "non-finite value".to_string(), |e| e.to_string())
        )));
    }
    Ok(MultiStartOutcome { x: best.0, value: best.1, best_raw, local_failures: failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sobol_points_in_box_and_distinct() {
        let b = Bounds::unit(1);
        let pts = sobol_candidates(&b, 4, 3);
        assert_eq!(pts.len(), 4);
        for i in 0..4 {
            for j in 0..i {
                assert_ne!(pts[i], pts[j]);
            }
        }
        let b7 = Bounds::new(vec![-3.0, 0.0, 1.0, -1.0, 5.0, 0.0, -10.0], vec![3.0, 1.0, 2.0, 1.0, 6.0, 0.1, 10.0]).unwrap();
        let pts = sobol_candidates(&b7, 500, 11);
        assert!(pts.iter().all(|p| b7.contains(p)));
        assert_eq!(pts, sobol_candidates(&b7, 500, 11));
    }

    /// Exact star discrepancy of a 2-d point set via rank-grid prefix counts.
    fn star_discrepancy(pts: &[Vec<f64>]) -> f64 {
        let n = pts.len();
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        xs.push(1.0);
        ys.push(1.0);
        let rank = |v: &[f64], q: f64| v.partition_point(|a| *a < q);
        let mut grid = vec![vec![0u32; n + 2]; n + 2];
        for p in pts {
            grid[rank(&xs, p[0]) + 1][rank(&ys, p[1]) + 1] += 1;
        }
        for i in 1..n + 2 {
            for j in 1..n + 2 {
                grid[i][j] += grid[i - 1][j] + grid[i][j - 1] - grid[i - 1][j - 1];
            }
        }
        let mut worst: f64 = 0.0;
        for (i, &a) in xs.iter().enumerate() {
            for (j, &b) in ys.iter().enumerate() {
                let vol = a * b;
                let closed = grid[i + 1][j + 1] as f64 / n as f64;
                let open = grid[i][j] as f64 / n as f64;
                worst = worst.max(closed - vol).max(vol - open);
            }
        }
        worst
    }

    #[test]
    fn sobol_beats_uniform_discrepancy() {
        let b = Bounds::unit(2);
        let sob = sobol_candidates(&b, 1024, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let uni: Vec<Vec<f64>> = (0..1024).map(|_| vec![rng.random(), rng.random()]).collect();
        let (ds, du) = (star_discrepancy(&sob), star_discrepancy(&uni));
        assert!(ds < du, "sobol {ds} vs uniform {du}");
    }

    #[test]
    fn boltzmann_limits() {
        let vals: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut top: Vec<usize> = (0..20).collect();
        top.sort_by(|a, b| vals[*b].total_cmp(&vals[*a]));
        let mut top3 = top[..3].to_vec();
        top3.sort();
        let mut hits = 0;
        for s in 0..1000 {
            let mut sel = boltzmann_select(&vals, 3, 1e6, s).unwrap();
            sel.sort();
            hits += (sel == top3) as usize;
        }
        assert!(hits as f64 / 1000.0 > 0.99);

        let trials = 10_000;
        let mut counts = [0usize; 20];
        for s in 0..trials {
            counts[boltzmann_select(&vals, 1, 0.0, s).unwrap()[0]] += 1;
        }
        let p: f64 = 1.0 / 20.0;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() < 3.5 * sd, "{counts:?}");
        }

        let mut counts = [0usize; 5];
        for s in 0..5000 {
            counts[boltzmann_select(&[2.0; 5], 1, 1.0, s).unwrap()[0]] += 1;
        }
        assert!(counts.iter().all(|c| (*c as f64 - 1000.0).abs() < 150.0));
        assert!(boltzmann_select(&[1.0, f64::NAN], 1, 1.0, 0).is_err());
        let sel = boltzmann_select(&[1.0, 2.0, 3.0], 3, 1.0, 0).unwrap();
        let mut s = sel.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2]);
    }

    #[test]
    fn concave_quadratic_interior() {
        let b = Bounds::from_pairs(&[(-2.0, 2.0), (0.0, 3.0), (-1.0, 1.0)]).unwrap();
        let c = [0.3, 1.7, -0.4];
        let s = FnSurface(|x: &[f64]| {
            let v = -x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            Ok((v, x.iter().zip(&c).map(|(a, b)| -2.0 * (a - b)).collect()))
        });
        let cfg = MultiStartConfig { n_raw: 256, ..Default::default() };
        let out = maximize_penalized(&s, &b, &cfg).unwrap();
        for (a, b) in out.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!(out.value >= out.best_raw - 1e-9);
    }

    #[test]
    fn linear_surface_hits_a_vertex() {
        let b = Bounds::from_pairs(&[(-1.0, 2.0), (3.0, 4.0)]).unwrap();
        let s = FnSurface(|x: &[f64]| Ok((x[0] - 2.0 * x[1], vec![1.0, -2.0])));
        let out = maximize_penalized(&s, &b, &MultiStartConfig { n_raw: 64, ..Default::default() }).unwrap();
        assert_eq!(out.x, vec![2.0, 3.0]);
    }

    #[test]
    fn bimodal_global_argmax() {
        // f(x) = exp(-(x-0.2)^2/0.01) + 1.3 exp(-(x-0.75)^2/0.005) on [0, 1]
        let f = |x: f64| (-(x - 0.2).powi(2) / 0.01).exp() + 1.3 * (-(x - 0.75).powi(2) / 0.005).exp();
        let df = |x: f64| {
            -2.0 * (x - 0.2) / 0.01 * (-(x - 0.2).powi(2) / 0.01).exp() - 1.3 * 2.0 * (x - 0.75) / 0.005 * (-(x - 0.75).powi(2) / 0.005).exp()
        };
        let grid_best = (0..=1_000_000).map(|i| i as f64 * 1e-6).max_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
        let b = Bounds::unit(1);
        let s = FnSurface(|x: &[f64]| Ok((f(x[0]), vec![df(x[0])])));
        let mut found = 0;
        for seed in 0..10 {
            let cfg = MultiStartConfig { n_raw: 128, seed, ..Default::default() };
            let out = maximize_penalized(&s, &b, &cfg).unwrap();
            found += ((out.x[0] - grid_best).abs() < 1e-4) as usize;
        }
        assert!(found >= 9, "{found}");
    }

    #[test]
    fn failing_starts_are_survivable_and_total_failure_errors() {
        let b = Bounds::unit(2);
        let s = FnSurface(|x: &[f64]| {
            if x[0] > 0.9 {
                Err(Error::Evaluation("region".into()))
            } else {
                Ok((x[0], vec![1.0, 0.0]))
            }
        });
        let values = |xs: &[Vec<f64>]| xs.iter().map(|x| if x[0] > 0.9 { f64::NAN } else { x[0] }).collect::<Vec<_>>();
        struct Wrapped<'a, F>(&'a FnSurface<F>, &'a dyn Fn(&[Vec<f64>]) -> Vec<f64>);
        impl<F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>> Surface for Wrapped<'_, F> {
            fn values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
                Ok((self.1)(xs))
            }
            fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
                self.0.value_grad(x)
            }
        }
        let out = maximize_penalized(&Wrapped(&s, &values), &b, &MultiStartConfig { n_raw: 64, ..Default::default() }).unwrap();
        assert!(out.x[0] <= 0.9 && out.value >= out.best_raw);

        let dead = FnSurface(|_: &[f64]| Ok((f64::NAN, vec![0.0, 0.0])));
        assert!(matches!(maximize_penalized(&dead, &b, &MultiStartConfig { n_raw: 8, ..Default::default() }), Err(Error::Optimizer(_))));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let b = Bounds::from_pairs(&[(-3.0, 3.0), (-3.0, 3.0)]).unwrap();
        let s = FnSurface(|x: &[f64]| Ok(((x[0] * 2.0).sin() * x[1].cos(), vec![2.0 * (x[0] * 2.0).cos() * x[1].cos(), -(x[0] * 2.0).sin() * x[1].sin()])));
        let cfg = MultiStartConfig { n_raw: 200, seed: 5, ..Default::default() };
        assert_eq!(maximize_penalized(&s, &b, &cfg).unwrap(), maximize_penalized(&s, &b, &cfg).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn result_in_box_and_not_worse_than_pool(seed in 0u64..500, a in -2.0f64..2.0, b in -2.0f64..2.0) {
                let bounds = Bounds::from_pairs(&[(-1.0, 1.0), (0.0, 2.0)]).unwrap();
                let s = FnSurface(move |x: &[f64]| {
                    let v = (a * x[0]).sin() + b * x[1] * x[0] - 0.1 * x[1] * x[1];
                    Ok((v, vec![a * (a * x[0]).cos() + b * x[1], b * x[0] - 0.2 * x[1]]))
                });
                let cfg = MultiStartConfig { n_raw: 64, seed, ..Default::default() };
                let out = maximize_penalized(&s, &bounds, &cfg).unwrap();
                prop_assert!(bounds.contains(&out.x));
                prop_assert!(out.value >= out.best_raw - 1e-9);
            }
        }
    }
}
