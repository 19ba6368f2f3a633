//! Known outer functions `g_i(x, y)` with forward-mode derivatives.
//!
//! Every outer function is written once as a generic function over [`Real`]
//! and instantiated twice: with `f64` for plain values and with a vector dual
//! number carrying one derivative lane per input and per black-box output.

use num_dual::DualSVec64;

pub use num_dual::DualNum;

/// Largest supported `d + m` for derivative evaluation.
pub const MAX_LANES: usize = 32;

/// Dual number type used for gradients of outer functions.
pub type Lanes = DualSVec64<MAX_LANES>;

/// Scalar types an outer function can be evaluated on.
pub trait Real: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Real for T {}

pub type OuterFn<T> = fn(&[T], &[T]) -> T;

/// One outer function in both instantiations.
#[derive(Clone, Copy)]
pub struct OuterDef {
    pub value: OuterFn<f64>,
    pub dual: OuterFn<Lanes>,
    /// Whether `g(x, y)` is affine in `y` for every fixed `x`.
    pub linear_in_y: bool,
}

impl std::fmt::Debug for OuterDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OuterDef").field("linear_in_y", &self.linear_in_y).finish_non_exhaustive()
    }
}

/// Builds an [`OuterDef`] from a generic function `fn g<T: Real>(x: &[T], y: &[T]) -> T`.
///
/// ```
/// use cuqb_core::outer::{OuterDef, Real};
/// fn g<T: Real>(x: &[T], y: &[T]) -> T { y[0] * 2.0 - x[0] }
/// let def: OuterDef = cuqb_core::outer!(g, linear);
/// assert_eq!((def.value)(&[1.0], &[3.0]), 5.0);
/// ```
#[macro_export]
macro_rules! outer {
    ($f:ident) => {
        $crate::outer::OuterDef { value: $f::<f64>, dual: $f::<$crate::outer::Lanes>, linear_in_y: false }
    };
    ($f:ident, linear) => {
        $crate::outer::OuterDef { value: $f::<f64>, dual: $f::<$crate::outer::Lanes>, linear_in_y: true }
    };
}

/// Affine representation `g(x, y) = a(x) . y + b(x)` with input derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub a: Vec<f64>,
    pub b: f64,
    /// `da[j][k] = d a_j / d x_k`.
    pub da: Vec<Vec<f64>>,
    pub db: Vec<f64>,
}

/// Value and partial derivatives of an outer function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterGrad {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

/// View of outer function `index` of a problem with `d` inputs and `m` outputs.
#[derive(Debug, Clone, Copy)]
pub struct CompositeOuter<'a> {
    def: &'a OuterDef,
    index: usize,
    d: usize,
    m: usize,
}

fn lanes(re: f64, lane: Option<usize>) -> Lanes {
    match lane {
        Some(i) => Lanes::from_re(re).derivative(i),
        None => Lanes::from_re(re),
    }
}

fn lane_vec(v: &Lanes, offset: usize, len: usize) -> Vec<f64> {
    match &v.eps.0 {
        Some(e) => (offset..offset + len).map(|i| e[i]).collect(),
        None => vec![0.0; len],
    }
}

impl<'a> CompositeOuter<'a> {
    pub fn new(def: &'a OuterDef, index: usize, d: usize, m: usize) -> Self {
        assert!(d + m <= MAX_LANES, "d + m = {} exceeds the {MAX_LANES} derivative lanes", d + m);
        Self { def, index, d, m }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn is_linear(&self) -> bool {
        self.def.linear_in_y
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.def.value)(x, y)
    }

    pub fn grad(&self, x: &[f64], y: &[f64]) -> OuterGrad {
        let xs: Vec<Lanes> = x.iter().enumerate().map(|(i, v)| lanes(*v, Some(i))).collect();
        let ys: Vec<Lanes> = y.iter().enumerate().map(|(j, v)| lanes(*v, Some(self.d + j))).collect();
        let r = (self.def.dual)(&xs, &ys);
        OuterGrad { value: r.re, grad_x: lane_vec(&r, 0, self.d), grad_y: lane_vec(&r, self.d, self.m) }
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.grad(x, y).grad_y
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.grad(x, y).grad_x
    }

    /// `a(x)` and `b(x)` without derivatives.
    pub fn linear_coeffs(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        if !self.def.linear_in_y {
            return None;
        }
        let mut y = vec![0.0; self.m];
        let b = (self.def.value)(x, &y);
        let a = (0..self.m)
            .map(|j| {
                y[j] = 1.0;
                let v = (self.def.value)(x, &y) - b;
                y[j] = 0.0;
                v
            })
            .collect();
        Some((a, b))
    }

    /// `a(x)`, `b(x)` and their input derivatives, for outer functions declared affine in `y`.
    pub fn linear_form(&self, x: &[f64]) -> Option<LinearForm> {
        if !self.def.linear_in_y {
            return None;
        }
        let xs: Vec<Lanes> = x.iter().enumerate().map(|(i, v)| lanes(*v, Some(i))).collect();
        let mut ys: Vec<Lanes> = vec![lanes(0.0, None); self.m];
        let base = (self.def.dual)(&xs, &ys);
        let b = base.re;
        let db = lane_vec(&base, 0, self.d);
        let mut a = Vec::with_capacity(self.m);
        let mut da = Vec::with_capacity(self.m);
        for j in 0..self.m {
            ys[j] = lanes(1.0, None);
            let r = (self.def.dual)(&xs, &ys);
            ys[j] = lanes(0.0, None);
            a.push(r.re - b);
            da.push(lane_vec(&r, 0, self.d).iter().zip(&db).map(|(u, v)| u - v).collect());
        }
        Some(LinearForm { a, b, da, db })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g_lin<T: Real>(x: &[T], y: &[T]) -> T {
        y[0] * x[0].sin() + y[1] * 3.0 - x[1] * x[1]
    }

    fn g_nl<T: Real>(x: &[T], y: &[T]) -> T {
        (y[0] * x[1]).exp() - y[1].powi(3) * x[0]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let def = outer!(g_nl);
        let g = CompositeOuter::new(&def, 0, 2, 2);
        let x = [0.3, -0.7];
        let y = [1.1, 0.4];
        let gr = g.grad(&x, &y);
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            xp[k] += h;
            let mut xm = x;
            xm[k] -= h;
            let fd = (g.eval(&xp, &y) - g.eval(&xm, &y)) / (2.0 * h);
            assert!((fd - gr.grad_x[k]).abs() < 1e-7);
            let mut yp = y;
            yp[k] += h;
            let mut ym = y;
            ym[k] -= h;
            let fd = (g.eval(&x, &yp) - g.eval(&x, &ym)) / (2.0 * h);
            assert!((fd - gr.grad_y[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn linear_form_reproduces_eval() {
        let def = outer!(g_lin, linear);
        let g = CompositeOuter::new(&def, 0, 2, 2);
        let x = [0.9, 0.2];
        let lf = g.linear_form(&x).unwrap();
        for y in [[0.0, 0.0], [1.5, -2.0], [-3.0, 7.0]] {
            let v = lf.a[0] * y[0] + lf.a[1] * y[1] + lf.b;
            assert!((v - g.eval(&x, &y)).abs() < 1e-10);
        }
        assert!((lf.da[0][0] - x[0].cos()).abs() < 1e-12);
        assert!((lf.db[1] + 2.0 * x[1]).abs() < 1e-12);
        assert!(CompositeOuter::new(&outer!(g_nl), 0, 2, 2).linear_form(&x).is_none());
    }
}
