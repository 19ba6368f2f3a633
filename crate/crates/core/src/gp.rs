//! Independent-output Gaussian process regression with Matérn-3/2 ARD kernels.
//!
//! Inputs are mapped to the unit box and outputs are centred and scaled before
//! fitting. Hyperparameters are reported back in the original units.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::{minimize_box, LbfgsOptions};
use crate::space::Bounds;

const SQRT3: f64 = 1.732_050_807_568_877_2;

const LOG_LS_RANGE: (f64, f64) = (-6.907_755_278_982_137, 6.907_755_278_982_137);
const LOG_SV_RANGE: (f64, f64) = (-13.815_510_557_964_274, 13.815_510_557_964_274);
const LOG_NOISE_RANGE: (f64, f64) = (-18.420_680_743_952_367, 4.605_170_185_988_092);

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

pub const DEFAULT_RESTARTS: usize = 8;

/// Kernel hyperparameters of one output, in input and output units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelHyper {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let h = Self { lengthscales, signal_variance, noise_variance };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return invalid("lengthscales must be positive and finite");
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return invalid("signal variance must be positive");
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return invalid("noise variance must be non-negative");
        }
        Ok(())
    }
}

#[inline]
fn matern32(sv: f64, r: f64) -> f64 {
    sv * (1.0 + SQRT3 * r) * (-SQRT3 * r).exp()
}

/// Matérn-3/2 ARD covariance between `x` and `x2`.
pub fn kernel_eval(hyper: &KernelHyper, x: &[f64], x2: &[f64]) -> Result<f64> {
    let d = hyper.lengthscales.len();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if x2.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x2.len() });
    }
    let r2: f64 = x
        .iter()
        .zip(x2)
        .zip(&hyper.lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    Ok(matern32(hyper.signal_variance, r2.sqrt()))
}

/// Observed inputs and vector-valued outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: Vec<f64>, y: Vec<f64>) {
        self.inputs.push(x);
        self.outputs.push(y);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.first().map_or(0, Vec::len)
    }

    /// Copy of the first `n` observations.
    pub fn prefix(&self, n: usize) -> Dataset {
        Dataset { inputs: self.inputs[..n].to_vec(), outputs: self.outputs[..n].to_vec() }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.outputs.iter().map(|y| y[j]).collect()
    }
}

/// Posterior mean and (diagonal) covariance at a single input.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl PosteriorMoments {
    pub fn std(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.sqrt()).collect()
    }

    pub fn cov(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.var.clone()))
    }

    /// Lower Cholesky factor of [`Self::cov`].
    pub fn chol(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.std()))
    }
}

/// Input derivatives of the posterior mean and Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGradients {
    /// `dmean[i][k] = d mu_i / d x_k`.
    pub dmean: Vec<Vec<f64>>,
    /// `dstd[i][k] = d C_ii / d x_k`; off-diagonal entries of `C` are identically zero.
    pub dstd: Vec<Vec<f64>>,
}

impl PosteriorGradients {
    /// Slice `dC/dx_k` of the Cholesky derivative as an `m x m` matrix.
    pub fn dchol(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(self.dstd.len(), self.dstd.iter().map(|r| r[k])))
    }
}

#[derive(Debug, Clone)]
struct OutputModel {
    inv_ls: Vec<f64>,
    sv: f64,
    noise: f64,
    y_mean: f64,
    y_scale: f64,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    log_lik: f64,
}

/// Options for [`GpSurrogate::fit_with`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Internal log-parameters of a previous fit, one vector per output, tried first.
    pub warm_start: Option<Vec<Vec<f64>>>,
    pub max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: DEFAULT_RESTARTS, seed: 0, warm_start: None, max_iters: 100 }
    }
}

/// Fitted multi-output GP. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    bounds: Bounds,
    scales: Vec<f64>,
    units: Vec<Vec<f64>>,
    data: Dataset,
    models: Vec<OutputModel>,
}

fn validate_data(data: &Dataset, bounds: &Bounds, min_len: usize) -> Result<()> {
    if data.len() < min_len {
        return invalid(format!("need at least {min_len} observations, got {}", data.len()));
    }
    if data.outputs.len() != data.inputs.len() {
        return Err(Error::DimensionMismatch { expected: data.inputs.len(), got: data.outputs.len() });
    }
    let m = data.n_outputs();
    if m == 0 {
        return invalid("observations must have at least one output");
    }
    for (x, y) in data.inputs.iter().zip(&data.outputs) {
        if x.len() != bounds.dim() {
            return Err(Error::DimensionMismatch { expected: bounds.dim(), got: x.len() });
        }
        if y.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: y.len() });
        }
        if y.iter().chain(x).any(|v| !v.is_finite()) {
            return invalid("observations must be finite");
        }
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64], inv_ls: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_ls)
        .map(|((x, y), w)| ((x - y) * w).powi(2))
        .sum()
}

/// Builds the train covariance (noise plus jitter on the diagonal) and factors it,
/// escalating the jitter on failure.
fn factor(units: &[Vec<f64>], inv_ls: &[f64], sv: f64, noise: f64, output: usize) -> Result<DMatrix<f64>> {
    let t = units.len();
    let mut base = DMatrix::zeros(t, t);
    for i in 0..t {
        base[(i, i)] = sv + noise;
        for j in 0..i {
            let k = matern32(sv, sq_dist(&units[i], &units[j], inv_ls).sqrt());
            base[(i, j)] = k;
            base[(j, i)] = k;
        }
    }
    let mut jitter = JITTER_START * sv;
    loop {
        let mut k = base.clone();
        for i in 0..t {
            k[(i, i)] += jitter;
        }
        if let Some(c) = k.cholesky() {
            return Ok(c.unpack());
        }
        if jitter >= JITTER_MAX * sv {
            return Err(Error::Cholesky { output, jitter });
        }
        jitter = (jitter * 10.0).min(JITTER_MAX * sv);
    }
}

fn standardize(y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 1e-300 { var.sqrt() } else { 1.0 };
    (mean, scale, y.iter().map(|v| (v - mean) / scale).collect())
}

fn log_lik_from(chol: &DMatrix<f64>, y: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
    let t = y.len() as f64;
    let logdet: f64 = chol.diagonal().iter().map(|v| v.ln()).sum();
    -0.5 * y.dot(alpha) - logdet - 0.5 * t * (2.0 * std::f64::consts::PI).ln()
}

fn solve_alpha(chol: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let v = chol.solve_lower_triangular(y).expect("factor has a positive diagonal");
    chol.tr_solve_lower_triangular(&v).expect("factor has a positive diagonal")
}

/// Negative log marginal likelihood and its gradient in log-parameters
/// `[log lengthscale_1..d, log signal variance, log noise variance]`.
fn nll_and_grad(units: &[Vec<f64>], y: &DVector<f64>, theta: &[f64], output: usize) -> Result<(f64, Vec<f64>)> {
    let d = theta.len() - 2;
    let inv_ls: Vec<f64> = theta[..d].iter().map(|l| (-l).exp()).collect();
    let sv = theta[d].exp();
    let noise = theta[d + 1].exp();
    let t = units.len();
    let chol = factor(units, &inv_ls, sv, noise, output)?;
    let alpha = solve_alpha(&chol, y);
    let nll = -log_lik_from(&chol, y, &alpha);

    let ident = DMatrix::<f64>::identity(t, t);
    let linv = chol.solve_lower_triangular(&ident).expect("factor has a positive diagonal");
    let kinv = linv.tr_mul(&linv);

    let mut grad = vec![0.0; d + 2];
    let mut trace_w = 0.0;
    for i in 0..t {
        let wii = alpha[i] * alpha[i] - kinv[(i, i)];
        trace_w += wii;
        grad[d] += wii * sv;
        for j in 0..i {
            let w = 2.0 * (alpha[i] * alpha[j] - kinv[(i, j)]);
            let mut r2 = 0.0;
            for k in 0..d {
                r2 += ((units[i][k] - units[j][k]) * inv_ls[k]).powi(2);
            }
            let r = r2.sqrt();
            let e = (-SQRT3 * r).exp();
            grad[d] += w * sv * (1.0 + SQRT3 * r) * e;
            let c = w * 3.0 * sv * e;
            for k in 0..d {
                grad[k] += c * ((units[i][k] - units[j][k]) * inv_ls[k]).powi(2);
            }
        }
    }
    grad[d + 1] = trace_w * noise;
    for g in &mut grad {
        *g *= -0.5;
    }
    Ok((nll, grad))
}

impl GpSurrogate {
    /// Maximum-likelihood fit with `restarts` initializations.
    pub fn fit_mle(data: &Dataset, bounds: &Bounds, restarts: usize, seed: u64) -> Result<Self> {
        Self::fit_with(data, bounds, &FitOptions { restarts, seed, ..Default::default() })
    }

    pub fn fit_with(data: &Dataset, bounds: &Bounds, opts: &FitOptions) -> Result<Self> {
        validate_data(data, bounds, 2)?;
        let d = bounds.dim();
        let units: Vec<Vec<f64>> = data.inputs.iter().map(|x| bounds.to_unit(x)).collect();
        let mut lo = vec![LOG_LS_RANGE.0; d];
        lo.extend([LOG_SV_RANGE.0, LOG_NOISE_RANGE.0]);
        let mut hi = vec![LOG_LS_RANGE.1; d];
        hi.extend([LOG_SV_RANGE.1, LOG_NOISE_RANGE.1]);
        let lbfgs = LbfgsOptions {
            max_iters: opts.max_iters,
            memory: 10,
            grad_tol: 1e-5,
            step_tol: 1e-8,
            f_tol: 1e-10,
            initial_step: 0.5,
        };

        let mut models = Vec::with_capacity(data.n_outputs());
        for j in 0..data.n_outputs() {
            let (y_mean, y_scale, ys) = standardize(&data.column(j));
            let y = DVector::from_vec(ys);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(j as u64));

            let mut starts: Vec<Vec<f64>> = Vec::new();
            let random_restarts = match &opts.warm_start {
                Some(w) => {
                    if let Some(th) = w.get(j).filter(|th| th.len() == d + 2) {
                        starts.push(th.clone());
                    }
                    opts.restarts
                }
                None => {
                    let mut th = vec![0.5_f64.ln(); d];
                    th.extend([0.0, 1e-3_f64.ln()]);
                    starts.push(th);
                    opts.restarts.saturating_sub(1)
                }
            };
            for _ in 0..random_restarts {
                let mut th: Vec<f64> = (0..d).map(|_| rng.random_range(0.05_f64.ln()..2.0_f64.ln())).collect();
                th.push(rng.random_range(0.3_f64.ln()..3.0_f64.ln()));
                th.push(rng.random_range(1e-6_f64.ln()..1e-1_f64.ln()));
                starts.push(th);
            }

            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut last_err = None;
            for th in starts {
                let th: Vec<f64> = th.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect();
                match minimize_box(|p| nll_and_grad(&units, &y, p, j), &th, &lo, &hi, &lbfgs) {
                    Ok(out) => {
                        if best.as_ref().is_none_or(|(f, _)| out.f < *f) {
                            best = Some((out.f, out.x));
                        }
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            let Some((_, theta)) = best else {
                return Err(match last_err {
                    Some(Error::Cholesky { jitter, .. }) => Error::Cholesky { output: j, jitter },
                    _ => Error::Cholesky { output: j, jitter: JITTER_MAX },
                });
            };
            let inv_ls: Vec<f64> = theta[..d].iter().map(|l| (-l).exp()).collect();
            models.push(Self::build_output(&units, &y, inv_ls, theta[d].exp(), theta[d + 1].exp(), y_mean, y_scale, j)?);
        }
        Ok(Self { bounds: bounds.clone(), scales: bounds.scales(), units, data: data.clone(), models })
    }

    /// Conditions on `data` with fixed hyperparameters given in original units.
    /// Outputs are not standardized, so the prior mean is exactly zero.
    pub fn with_hyperparameters(data: &Dataset, bounds: &Bounds, hypers: &[KernelHyper]) -> Result<Self> {
        validate_data(data, bounds, 1)?;
        if hypers.len() != data.n_outputs() {
            return Err(Error::DimensionMismatch { expected: data.n_outputs(), got: hypers.len() });
        }
        let scales = bounds.scales();
        let units: Vec<Vec<f64>> = data.inputs.iter().map(|x| bounds.to_unit(x)).collect();
        let mut models = Vec::with_capacity(hypers.len());
        for (j, h) in hypers.iter().enumerate() {
            h.validate()?;
            if h.lengthscales.len() != bounds.dim() {
                return Err(Error::DimensionMismatch { expected: bounds.dim(), got: h.lengthscales.len() });
            }
            let inv_ls: Vec<f64> = h.lengthscales.iter().zip(&scales).map(|(l, w)| w / l).collect();
            let y = DVector::from_vec(data.column(j));
            models.push(Self::build_output(&units, &y, inv_ls, h.signal_variance, h.noise_variance, 0.0, 1.0, j)?);
        }
        Ok(Self { bounds: bounds.clone(), scales, units, data: data.clone(), models })
    }

    /// The same hyperparameters and output scaling conditioned on the first
    /// `n` training points only. `n = 0` gives the prior.
    pub fn conditioned_on_prefix(&self, n: usize) -> Result<Self> {
        if n > self.data.len() {
            return invalid(format!("prefix of {n} points requested from {} observations", self.data.len()));
        }
        let data = self.data.prefix(n);
        let units = self.units[..n].to_vec();
        let models = self
            .models
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let y = DVector::from_iterator(n, data.column(j).iter().map(|v| (v - m.y_mean) / m.y_scale));
                Self::build_output(&units, &y, m.inv_ls.clone(), m.sv, m.noise, m.y_mean, m.y_scale, j)
            })
            .collect::<Result<_>>()?;
        Ok(Self { bounds: self.bounds.clone(), scales: self.scales.clone(), units, data, models })
    }

    #[allow(clippy::too_many_arguments)]
    fn build_output(
        units: &[Vec<f64>],
        y: &DVector<f64>,
        inv_ls: Vec<f64>,
        sv: f64,
        noise: f64,
        y_mean: f64,
        y_scale: f64,
        output: usize,
    ) -> Result<OutputModel> {
        let chol = factor(units, &inv_ls, sv, noise, output)?;
        let alpha = solve_alpha(&chol, y);
        let log_lik = log_lik_from(&chol, y, &alpha);
        Ok(OutputModel { inv_ls, sv, noise, y_mean, y_scale, chol, alpha, log_lik })
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn n_outputs(&self) -> usize {
        self.models.len()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Hyperparameters per output in original input/output units.
    pub fn hyperparameters(&self) -> Vec<KernelHyper> {
        self.models
            .iter()
            .map(|m| KernelHyper {
                lengthscales: m.inv_ls.iter().zip(&self.scales).map(|(w, s)| s / w).collect(),
                signal_variance: m.sv * m.y_scale * m.y_scale,
                noise_variance: m.noise * m.y_scale * m.y_scale,
            })
            .collect()
    }

    /// Internal log-parameters, suitable as [`FitOptions::warm_start`].
    pub fn log_params(&self) -> Vec<Vec<f64>> {
        self.models
            .iter()
            .map(|m| {
                let mut th: Vec<f64> = m.inv_ls.iter().map(|w| -w.ln()).collect();
                th.extend([m.sv.ln(), m.noise.ln()]);
                th
            })
            .collect()
    }

    /// Log marginal likelihood of each output (in standardized units).
    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.models.iter().map(|m| m.log_lik).collect()
    }

    fn check_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.bounds.to_unit(x))
    }

    pub fn posterior(&self, x: &[f64]) -> Result<PosteriorMoments> {
        let u = self.check_point(x)?;
        let mut mean = Vec::with_capacity(self.models.len());
        let mut var = Vec::with_capacity(self.models.len());
        for m in &self.models {
            let k = DVector::from_iterator(self.units.len(), self.units.iter().map(|xi| matern32(m.sv, sq_dist(&u, xi, &m.inv_ls).sqrt())));
            let v = m.chol.solve_lower_triangular(&k).expect("factor has a positive diagonal");
            mean.push(m.y_mean + m.y_scale * k.dot(&m.alpha));
            var.push(m.y_scale * m.y_scale * (m.sv - v.norm_squared()).max(0.0));
        }
        Ok(PosteriorMoments { mean, var })
    }

    /// Posterior moments at many inputs, using one blocked triangular solve per output.
    pub fn posterior_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<PosteriorMoments>> {
        let us: Vec<Vec<f64>> = xs.iter().map(|x| self.check_point(x)).collect::<Result<_>>()?;
        let n = us.len();
        let t = self.units.len();
        let mut out: Vec<PosteriorMoments> =
            (0..n).map(|_| PosteriorMoments { mean: Vec::with_capacity(self.models.len()), var: Vec::with_capacity(self.models.len()) }).collect();
        for m in &self.models {
            let mut kx = DMatrix::zeros(t, n);
            for (c, u) in us.iter().enumerate() {
                for (r, xi) in self.units.iter().enumerate() {
                    kx[(r, c)] = matern32(m.sv, sq_dist(u, xi, &m.inv_ls).sqrt());
                }
            }
            let v = m.chol.solve_lower_triangular(&kx).expect("factor has a positive diagonal");
            let means = kx.tr_mul(&m.alpha);
            for (c, o) in out.iter_mut().enumerate() {
                o.mean.push(m.y_mean + m.y_scale * means[c]);
                let q = v.column(c).norm_squared();
                o.var.push(m.y_scale * m.y_scale * (m.sv - q).max(0.0));
            }
        }
        Ok(out)
    }

    /// Posterior moments together with their input derivatives.
    ///
    /// Where the variance vanishes the standard-deviation derivative is
    /// computed against a floor equal to the initial jitter level.
    pub fn posterior_with_gradients(&self, x: &[f64]) -> Result<(PosteriorMoments, PosteriorGradients)> {
        let u = self.check_point(x)?;
        let d = self.dim();
        let t = self.units.len();
        let mut mean = Vec::with_capacity(self.models.len());
        let mut var = Vec::with_capacity(self.models.len());
        let mut dmean = Vec::with_capacity(self.models.len());
        let mut dstd = Vec::with_capacity(self.models.len());
        for m in &self.models {
            let mut k = DVector::zeros(t);
            let mut dk = DMatrix::zeros(t, d);
            for (j, xi) in self.units.iter().enumerate() {
                let r = sq_dist(&u, xi, &m.inv_ls).sqrt();
                let e = (-SQRT3 * r).exp();
                k[j] = m.sv * (1.0 + SQRT3 * r) * e;
                for c in 0..d {
                    dk[(j, c)] = -3.0 * m.sv * e * (u[c] - xi[c]) * m.inv_ls[c] * m.inv_ls[c] / self.scales[c];
                }
            }
            let v = m.chol.solve_lower_triangular(&k).expect("factor has a positive diagonal");
            let beta = m.chol.tr_solve_lower_triangular(&v).expect("factor has a positive diagonal");
            let s2 = m.y_scale * m.y_scale;
            let var_i = s2 * (m.sv - v.norm_squared()).max(0.0);
            let dmu = dk.tr_mul(&m.alpha) * m.y_scale;
            let dvar = dk.tr_mul(&beta) * (-2.0 * s2);
            let denom = 2.0 * var_i.sqrt().max((JITTER_START * m.sv * s2).sqrt());
            mean.push(m.y_mean + m.y_scale * k.dot(&m.alpha));
            var.push(var_i);
            dmean.push(dmu.iter().copied().collect());
            dstd.push(if var_i > 0.0 { dvar.iter().map(|g| g / denom).collect() } else { vec![0.0; d] });
        }
        Ok((PosteriorMoments { mean, var }, PosteriorGradients { dmean, dstd }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Dataset::new();
        for _ in 0..n {
            let x: Vec<f64> = vec![rng.random_range(-2.0..2.0), rng.random_range(0.0..1.0)];
            let y = vec![(2.0 * x[0]).sin() + x[1] * x[1], x[0] * x[1] + 3.0];
            data.push(x, y);
        }
        data
    }

    fn bounds() -> Bounds {
        Bounds::from_pairs(&[(-2.0, 2.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn kernel_values() {
        let h = KernelHyper::new(vec![1.0], 1.0, 0.0).unwrap();
        let v = kernel_eval(&h, &[0.0], &[1.0]).unwrap();
        let expected = (1.0 + 3f64.sqrt()) * (-(3f64.sqrt())).exp();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.483_357_7).abs() < 1e-7);
        assert_eq!(kernel_eval(&h, &[0.3], &[0.3]).unwrap(), 1.0);
        assert!(kernel_eval(&h, &[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn invalid_hyper_rejected() {
        assert!(KernelHyper::new(vec![0.0], 1.0, 0.0).is_err());
        assert!(KernelHyper::new(vec![1.0], 0.0, 0.0).is_err());
        assert!(KernelHyper::new(vec![1.0], 1.0, -1e-3).is_err());
    }

    #[test]
    fn mle_gradient_matches_finite_differences() {
        let data = toy_data(15, 3);
        let b = bounds();
        let units: Vec<Vec<f64>> = data.inputs.iter().map(|x| b.to_unit(x)).collect();
        let (_, _, ys) = standardize(&data.column(0));
        let y = DVector::from_vec(ys);
        let theta = vec![-0.7, 0.2, 0.3, -4.0];
        let (_, g) = nll_and_grad(&units, &y, &theta, 0).unwrap();
        for k in 0..theta.len() {
            let h = 1e-6;
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            let fd = (nll_and_grad(&units, &y, &tp, 0).unwrap().0 - nll_and_grad(&units, &y, &tm, 0).unwrap().0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-5 * fd.abs().max(1.0), "component {k}: fd {fd} analytic {}", g[k]);
        }
    }

    #[test]
    fn batch_matches_pointwise() {
        let data = toy_data(12, 5);
        let gp = GpSurrogate::fit_mle(&data, &bounds(), 2, 1).unwrap();
        let xs = vec![vec![0.1, 0.2], vec![-1.5, 0.9], vec![1.9, 0.0]];
        let batch = gp.posterior_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            let p = gp.posterior(x).unwrap();
            for j in 0..2 {
                assert!((p.mean[j] - b.mean[j]).abs() < 1e-10);
                assert!((p.var[j] - b.var[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moments_cholesky_reconstructs_cov() {
        let p = PosteriorMoments { mean: vec![0.0, 1.0], var: vec![2.0, 0.5] };
        let c = p.chol();
        let diff = (&c * c.transpose() - p.cov()).norm() / p.cov().norm();
        assert!(diff < 1e-10);
    }

    #[test]
    fn warm_start_matches_cold_fit_quality() {
        let data = toy_data(20, 9);
        let cold = GpSurrogate::fit_mle(&data, &bounds(), 4, 0).unwrap();
        let warm = GpSurrogate::fit_with(
            &data,
            &bounds(),
            &FitOptions { restarts: 0, warm_start: Some(cold.log_params()), ..Default::default() },
        )
        .unwrap();
        for (a, b) in cold.log_likelihoods().iter().zip(warm.log_likelihoods()) {
            assert!(b >= a - 1e-6);
        }
    }

    #[test]
    fn too_few_points_rejected() {
        let mut data = Dataset::new();
        data.push(vec![0.0, 0.0], vec![1.0]);
        assert!(GpSurrogate::fit_mle(&data, &bounds(), 1, 0).is_err());
    }
}
