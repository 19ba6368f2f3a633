//! Calibration of a two-spill pollutant diffusion model.
//!
//! The black box returns the concentration at 24 observation points for
//! parameters `x = (M, D, L, tau)`, ordered location-major. The objective is
//! the negated squared misfit against observations generated by the true
//! parameters, so the maximum is 0.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{unknown_variant, CompositeProblem, KnownOptimum};
use crate::error::{invalid, Result};
use crate::outer::Real;
use crate::space::Bounds;

pub const LOCATIONS: [f64; 4] = [1.0, 1.5, 2.5, 3.0];
pub const TIMES: [f64; 6] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
pub const TRUE_PARAMETERS: [f64; 4] = [10.0, 0.07, 1.505, 30.1525];

/// Concentration at location `s` and time `t` after a spill of mass `mass`
/// at the origin and a second one at `lambda` released at time `tau`.
pub fn environmental_concentration(s: f64, t: f64, mass: f64, d: f64, lambda: f64, tau: f64) -> Result<f64> {
    if !(t > 0.0) || !(d > 0.0) {
        return invalid(format!("concentration needs t > 0 and D > 0, got t = {t}, D = {d}"));
    }
    let first = mass / (4.0 * PI * d * t).sqrt() * (-s * s / (4.0 * d * t)).exp();
    let second = if t > tau {
        let dt = t - tau;
        mass / (4.0 * PI * d * dt).sqrt() * (-(s - lambda).powi(2) / (4.0 * d * dt)).exp()
    } else {
        0.0
    };
    Ok(first + second)
}

fn concentrations(x: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(LOCATIONS.len() * TIMES.len());
    for s in LOCATIONS {
        for t in TIMES {
            out.push(environmental_concentration(s, t, x[0], x[1], x[2], x[3])?);
        }
    }
    Ok(out)
}

fn observed() -> &'static [f64] {
    static OBS: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    OBS.get_or_init(|| concentrations(&TRUE_PARAMETERS).expect("true parameters are valid"))
}

fn misfit<T: Real>(_x: &[T], y: &[T]) -> T {
    let mut s = T::from(0.0);
    for (yi, ci) in y.iter().zip(observed()) {
        let r = *yi - *ci;
        s += r * r;
    }
    -s
}

pub(super) fn problem(variant: Option<&str>) -> Result<CompositeProblem> {
    if let Some(v) = variant {
        return Err(unknown_variant("env-model", v, &[]));
    }
    CompositeProblem::new(
        "env-model",
        Bounds::from_pairs(&[(7.0, 13.0), (0.02, 0.12), (0.01, 3.0), (30.01, 30.295)])?,
        LOCATIONS.len() * TIMES.len(),
        Arc::new(|x: &[f64]| concentrations(x)),
        vec![crate::outer!(misfit)],
        Some(KnownOptimum::published(0.0, TRUE_PARAMETERS.to_vec())),
    )
}
