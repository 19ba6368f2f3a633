//! Williams-Otto continuous stirred-tank reactor.
//!
//! Three reactions `A + B -> C`, `B + C -> P + E` and `C + P -> G` run in a
//! reactor of holdup `W` fed with pure A at `F_A` and pure B at `F_B`. The
//! decision variables are `x = (F_B, T_r)` with `T_r` in degrees Celsius. The
//! black box solves the steady-state mass balance for the six mass fractions
//! and reports `(X_A, X_G, X_P, X_E)`.
//!
//! Constants follow the usual real-time-optimization benchmark:
//!
//! | constant | value |
//! |----------|-------|
//! | `F_A` | 1.8275 kg/s |
//! | `W` | 2105 kg |
//! | `k_1` | 1.6599e6 exp(-6666.7 / T) |
//! | `k_2` | 7.2117e8 exp(-8333.3 / T) |
//! | `k_3` | 2.6745e12 exp(-11111 / T) |
//!
//! with `T = T_r + 273.15`.

use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix6, Vector6};

use super::{unknown_variant, CompositeProblem, KnownOptimum};
use crate::error::{Error, Result};
use crate::outer::Real;
use crate::space::Bounds;

pub const FEED_A: f64 = 1.8275;
pub const HOLDUP: f64 = 2105.0;
pub const BOUNDS: [(f64, f64); 2] = [(3.0, 6.0), (70.0, 100.0)];

const START: [f64; 6] = [0.1, 0.4, 0.05, 0.2, 0.05, 0.1];
const MAX_NEWTON: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;

/// Steady-state mass fractions `[X_A, X_B, X_C, X_E, X_G, X_P]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactorState {
    pub fractions: [f64; 6],
    pub iterations: usize,
}

fn rate_constants(tr: f64) -> [f64; 3] {
    let t = tr + 273.15;
    [1.6599e6 * (-6666.7 / t).exp(), 7.2117e8 * (-8333.3 / t).exp(), 2.6745e12 * (-11111.0 / t).exp()]
}

fn residual(x: &Vector6<f64>, fb: f64, k: &[f64; 3]) -> Vector6<f64> {
    let (xa, xb, xc, xe, xg, xp) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let f = FEED_A + fb;
    let r1 = HOLDUP * k[0] * xa * xb;
    let r2 = HOLDUP * k[1] * xb * xc;
    let r3 = HOLDUP * k[2] * xc * xp;
    Vector6::new(
        FEED_A - f * xa - r1,
        fb - f * xb - r1 - r2,
        -f * xc + 2.0 * r1 - 2.0 * r2 - r3,
        -f * xe + 2.0 * r2,
        -f * xg + 1.5 * r3,
        -f * xp + r2 - 0.5 * r3,
    )
}

fn jacobian(x: &Vector6<f64>, fb: f64, k: &[f64; 3]) -> Matrix6<f64> {
    let (xa, xb, xc, xp) = (x[0], x[1], x[2], x[5]);
    let f = FEED_A + fb;
    let w = HOLDUP;
    // Partial derivatives of the three rates with respect to [XA, XB, XC, XP].
    let d1 = [w * k[0] * xb, w * k[0] * xa, 0.0, 0.0];
    let d2 = [0.0, w * k[1] * xc, w * k[1] * xb, 0.0];
    let d3 = [0.0, 0.0, w * k[2] * xp, w * k[2] * xc];
    let cols = [0usize, 1, 2, 5];
    let coef: [[f64; 3]; 6] =
        [[-1.0, 0.0, 0.0], [-1.0, -1.0, 0.0], [2.0, -2.0, -1.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.5], [0.0, 1.0, -0.5]];
    let mut j = Matrix6::from_diagonal_element(-f);
    for (row, c) in coef.iter().enumerate() {
        for (q, &col) in cols.iter().enumerate() {
            j[(row, col)] += c[0] * d1[q] + c[1] * d2[q] + c[2] * d3[q];
        }
    }
    j
}

/// Solves the steady-state balance by damped Newton iteration, keeping all
/// fractions non-negative.
pub fn solve_reactor(fb: f64, tr: f64) -> Result<ReactorState> {
    if !(fb.is_finite() && tr.is_finite()) || fb < 0.0 {
        return Err(Error::Evaluation(format!("invalid reactor inputs F_B = {fb}, T_r = {tr}")));
    }
    let k = rate_constants(tr);
    let mut x = Vector6::from_column_slice(&START);
    let mut r = residual(&x, fb, &k);
    for it in 0..MAX_NEWTON {
        let norm = r.norm();
        if norm < RESIDUAL_TOL {
            let mut fractions = [0.0; 6];
            fractions.copy_from_slice(x.as_slice());
            return Ok(ReactorState { fractions, iterations: it });
        }
        let step = jacobian(&x, fb, &k)
            .lu()
            .solve(&(-r))
            .ok_or_else(|| Error::Evaluation(format!("singular reactor Jacobian at F_B = {fb}, T_r = {tr}")))?;
        let mut alpha = 1.0;
        loop {
            let trial = x + step * alpha;
            if trial.iter().all(|v| *v >= 0.0) {
                let rt = residual(&trial, fb, &k);
                if rt.norm() < (1.0 - 1e-4 * alpha) * norm {
                    x = trial;
                    r = rt;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                return Err(Error::Evaluation(format!("reactor line search stalled at F_B = {fb}, T_r = {tr}")));
            }
        }
    }
    Err(Error::Evaluation(format!("reactor Newton solve did not converge at F_B = {fb}, T_r = {tr}")))
}

/// Black-box outputs `(X_A, X_G, X_P, X_E)`.
pub fn williams_otto_blackbox(fb: f64, tr: f64) -> Result<[f64; 4]> {
    let s = solve_reactor(fb, tr)?.fractions;
    Ok([s[0], s[4], s[5], s[3]])
}

fn profit<T: Real>(x: &[T], y: &[T]) -> T {
    (y[2] * 1043.38 + y[3] * 2092.0) * (x[0] + FEED_A) - 79.23 * FEED_A - x[0] * 118.34
}
fn limit_a<T: Real>(_x: &[T], y: &[T]) -> T {
    -y[0] + 0.12
}
fn limit_g<T: Real>(_x: &[T], y: &[T]) -> T {
    -y[1] + 0.08
}

fn feasible_profit(fb: f64, tr: f64) -> Option<f64> {
    let y = williams_otto_blackbox(fb, tr).ok()?;
    let x = [fb, tr];
    (limit_a(&x, &y) >= 0.0 && limit_g(&x, &y) >= 0.0).then(|| profit(&x, &y))
}

fn best_on_grid(lo: [f64; 2], hi: [f64; 2], n: usize) -> Option<(f64, [f64; 2])> {
    let mut best: Option<(f64, [f64; 2])> = None;
    for i in 0..n {
        let fb = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let tr = lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64;
            if let Some(v) = feasible_profit(fb, tr) {
                if best.is_none_or(|b| v > b.0) {
                    best = Some((v, [fb, tr]));
                }
            }
        }
    }
    best
}

/// Best feasible profit and its location: a 400 x 400 grid over the box,
/// refined by successively shrinking grids around the incumbent.
pub fn williams_otto_reference() -> (f64, [f64; 2]) {
    static REF: OnceLock<(f64, [f64; 2])> = OnceLock::new();
    *REF.get_or_init(|| {
        let lo = [BOUNDS[0].0, BOUNDS[1].0];
        let hi = [BOUNDS[0].1, BOUNDS[1].1];
        let mut best = best_on_grid(lo, hi, 400).expect("feasible points exist");
        let mut half = [(hi[0] - lo[0]) / 399.0, (hi[1] - lo[1]) / 399.0];
        for _ in 0..12 {
            let wlo = [(best.1[0] - half[0]).max(lo[0]), (best.1[1] - half[1]).max(lo[1])];
            let whi = [(best.1[0] + half[0]).min(hi[0]), (best.1[1] + half[1]).min(hi[1])];
            if let Some(b) = best_on_grid(wlo, whi, 41) {
                if b.0 >= best.0 {
                    best = b;
                }
            }
            half = [half[0] / 10.0, half[1] / 10.0];
        }
        best
    })
}

pub(super) fn problem(variant: Option<&str>) -> Result<CompositeProblem> {
    if let Some(v) = variant {
        return Err(unknown_variant("williams-otto", v, &[]));
    }
    let (value, x) = williams_otto_reference();
    CompositeProblem::new(
        "williams-otto",
        Bounds::from_pairs(&BOUNDS)?,
        4,
        Arc::new(|x: &[f64]| williams_otto_blackbox(x[0], x[1]).map(|y| y.to_vec())),
        vec![crate::outer!(profit, linear), crate::outer!(limit_a, linear), crate::outer!(limit_g, linear)],
        Some(KnownOptimum::computed(value, Some(x.to_vec()), "dense grid search with local refinement")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_across_the_box() {
        for i in 0..=20 {
            for j in 0..=20 {
                let fb = 3.0 + 0.15 * i as f64;
                let tr = 70.0 + 1.5 * j as f64;
                let s = solve_reactor(fb, tr).unwrap();
                assert!(s.iterations <= 20);
                let total: f64 = s.fractions.iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "mass fractions sum to {total}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let k = rate_constants(85.0);
        let x = Vector6::from_column_slice(&[0.08, 0.35, 0.02, 0.25, 0.1, 0.11]);
        let j = jacobian(&x, 4.5, &k);
        for c in 0..6 {
            let mut xp = x;
            xp[c] += 1e-7;
            let mut xm = x;
            xm[c] -= 1e-7;
            let fd = (residual(&xp, 4.5, &k) - residual(&xm, 4.5, &k)) / 2e-7;
            for r in 0..6 {
                assert!((fd[r] - j[(r, c)]).abs() < 1e-5 * (1.0 + j[(r, c)].abs()));
            }
        }
    }

    #[test]
    fn reference_is_feasible_and_beats_coarse_grid() {
        let (v, x) = williams_otto_reference();
        assert!(v >= 4301.9);
        assert!(feasible_profit(x[0], x[1]).is_some());
        let coarse = best_on_grid([3.0, 70.0], [6.0, 100.0], 31).unwrap();
        assert!(v >= coarse.0);
    }
}
