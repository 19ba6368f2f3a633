//! Synthetic unconstrained and constrained test problems.
//!
//! Where the published formulation is internally inconsistent, the default
//! build uses the corrected reading and the literal one is available as the
//! `verbatim` variant.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{unknown_variant, BlackBox, CompositeProblem, KnownOptimum};
use crate::error::Result;
use crate::outer;
use crate::outer::Real;
use crate::space::Bounds;

fn bb(f: fn(&[f64]) -> Vec<f64>) -> BlackBox {
    Arc::new(move |x: &[f64]| Ok(f(x)))
}

fn uniform_box(d: usize, lo: f64, hi: f64) -> Bounds {
    Bounds::new(vec![lo; d], vec![hi; d]).expect("valid box")
}

fn boxed(pairs: &[(f64, f64)]) -> Bounds {
    Bounds::from_pairs(pairs).expect("valid box")
}

fn no_variants(base: &str, variant: Option<&str>) -> Result<()> {
    match variant {
        None => Ok(()),
        Some(v) => Err(unknown_variant(base, v, &[])),
    }
}

fn sq<T: Real>(v: T) -> T {
    v * v
}

// ---------------------------------------------------------------- unconstrained

fn booth_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] + sq(x[0] * 2.0 + x[1] - 5.0))
}

pub(super) fn booth(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("booth", variant)?;
    CompositeProblem::new(
        "booth",
        uniform_box(2, -10.0, 10.0),
        1,
        bb(|x| vec![(x[0] + 2.0 * x[1] - 7.0).powi(2)]),
        vec![outer!(booth_g0, linear)],
        Some(KnownOptimum::published(0.0, vec![1.0, 3.0])),
    )
}

fn wolfe_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] * (4.0 / 3.0) + x[2])
}

pub(super) fn wolfe(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("wolfe", variant)?;
    CompositeProblem::new(
        "wolfe",
        uniform_box(3, 0.0, 2.0),
        1,
        bb(|x| vec![(x[0] * x[0] + x[1] * x[1] - x[0] * x[1]).powf(0.75)]),
        vec![outer!(wolfe_g0, linear)],
        Some(KnownOptimum::corrected(0.0, Some(vec![0.0, 0.0, 0.0]), "published x* = [1,1,1] evaluates to -2.333")),
    )
}

fn rastrigin_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] + y[1] + 30.0 + x[2] * x[2] - (x[2] * (2.0 * PI)).cos() * 10.0)
}

pub(super) fn rastrigin(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("rastrigin", variant)?;
    CompositeProblem::new(
        "rastrigin",
        uniform_box(3, -5.0, 5.0),
        2,
        bb(|x| (0..2).map(|i| x[i] * x[i] - 10.0 * (2.0 * PI * x[i]).cos()).collect()),
        vec![outer!(rastrigin_g0, linear)],
        Some(KnownOptimum::published(0.0, vec![0.0; 3])),
    )
}

fn colville_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] + sq(x[2] * x[2] - x[3]) * 90.0 + (sq(x[1] - 1.0) + sq(x[3] - 1.0)) * 10.1 + (x[1] - 1.0) * (x[3] - 1.0) * 19.8)
}

pub(super) fn colville(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("colville", variant)?;
    CompositeProblem::new(
        "colville",
        uniform_box(4, -10.0, 10.0),
        1,
        bb(|x| vec![100.0 * (x[0] * x[0] - x[1]).powi(2) + (x[2] - 1.0).powi(2) + (x[0] - 1.0).powi(2)]),
        vec![outer!(colville_g0, linear)],
        Some(KnownOptimum::published(0.0, vec![1.0; 4])),
    )
}

fn friedman_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] * 10.0 + sq(x[2] - 0.5) * 20.0 + x[3] * 10.0 + x[4] * 5.0)
}

pub(super) fn friedman(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("friedman", variant)?;
    CompositeProblem::new(
        "friedman",
        uniform_box(5, 0.0, 1.0),
        1,
        bb(|x| vec![(PI * x[0] * x[1]).sin()]),
        vec![outer!(friedman_g0, linear)],
        Some(KnownOptimum::corrected(
            0.0,
            Some(vec![0.0, 0.0, 0.5, 0.0, 0.0]),
            "published 27.5 at x4 = x5 = -1.5 lies outside the box [0,1]^5",
        )),
    )
}

fn dolan_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] - y[1] + x[4] * x[4] * 0.2 - x[1] - 1.0)
}

pub(super) fn dolan(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("dolan", variant)?;
    CompositeProblem::new(
        "dolan",
        uniform_box(5, -100.0, 100.0),
        2,
        bb(|x| vec![(x[0] + 1.7 * x[1]) * x[0].sin(), 1.5 * x[2] - 0.1 * x[3] * (x[4] + x[3] - x[0]).cos()]),
        vec![outer!(dolan_g0, linear)],
        Some(KnownOptimum::corrected(
            529.557_295_941_9,
            Some(vec![98.964_258_24, 100.0, 100.0, 96.083_059_34, -0.249_986_06]),
            "published x* evaluates to 510.03; multistart search gives 529.5573",
        )),
    )
}

fn rosenbrock_head<T: Real>(x: &[T], y: &[T]) -> T {
    let mut s = y[3] + sq(-x[4] + 1.0);
    for i in 0..3 {
        s += sq(y[i]) * 100.0 + sq(-x[i] + 1.0);
    }
    s
}

fn rosenbrock_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(rosenbrock_head(x, y) + sq(x[4] - x[3] * x[3]) * 100.0 + sq(x[5] - x[4] * x[4]) * 100.0)
}

fn rosenbrock_verbatim_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(rosenbrock_head(x, y) + (x[4] - x[3] * x[3]) * 100.0 + (x[5] - x[4] * x[4]) * 100.0)
}

pub(super) fn rosenbrock(variant: Option<&str>) -> Result<CompositeProblem> {
    let (g0, opt) = match variant {
        None => (
            outer!(rosenbrock_g0),
            Some(KnownOptimum::corrected(0.0, Some(vec![1.0; 6]), "published x* = 0 evaluates to -5; unsquared terms squared")),
        ),
        Some("verbatim") => (outer!(rosenbrock_verbatim_g0), None),
        Some(v) => return Err(unknown_variant("rosenbrock", v, &["verbatim"])),
    };
    CompositeProblem::new(
        "rosenbrock",
        uniform_box(6, -2.0, 2.0),
        4,
        bb(|x| {
            vec![
                x[1] * x[1] - x[0] * x[0],
                x[2] * x[2] - x[1] * x[1],
                x[3] * x[3] - x[2] * x[2],
                (1.0 - x[3]).powi(2),
            ]
        }),
        vec![g0],
        opt,
    )
}

fn zakharov_sum<T: Real>(x: &[T]) -> T {
    let mut s = T::from(0.0);
    for (i, xi) in x.iter().enumerate() {
        s += sq(*xi * (0.5 * (i + 1) as f64));
    }
    s
}

fn zakharov_g0<T: Real>(x: &[T], y: &[T]) -> T {
    let mut s2 = T::from(0.0);
    for xi in x {
        s2 += *xi * *xi;
    }
    let z = zakharov_sum(x);
    -(s2 + z + y[0] * z)
}

pub(super) fn zakharov(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("zakharov", variant)?;
    CompositeProblem::new(
        "zakharov",
        uniform_box(7, -5.0, 10.0),
        1,
        bb(|x| vec![zakharov_sum(x)]),
        vec![outer!(zakharov_g0, linear)],
        Some(KnownOptimum::published(0.0, vec![0.0; 7])),
    )
}

fn powell_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] + sq(x[4] + x[5] * 10.0) + y[1] + sq(x[6] - x[7]) * 5.0 + (x[1] - x[2] * 2.0).powi(4) + y[2]
        + (x[0] - x[3]).powi(4) * 10.0
        + y[3])
}

pub(super) fn powell(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("powell", variant)?;
    CompositeProblem::new(
        "powell",
        uniform_box(8, -4.0, 5.0),
        4,
        bb(|x| {
            vec![
                (x[0] + 10.0 * x[1]).powi(2),
                5.0 * (x[2] - x[3]).powi(2),
                (x[5] - 2.0 * x[6]).powi(4),
                10.0 * (x[4] - x[7]).powi(4),
            ]
        }),
        vec![outer!(powell_g0, linear)],
        Some(KnownOptimum::published(0.0, vec![0.0; 8])),
    )
}

fn st_term<T: Real>(v: T) -> T {
    (v.powi(4) - v * v * 16.0 + v * 5.0) * 0.5
}

fn styblinski_tang_g0<T: Real>(x: &[T], y: &[T]) -> T {
    let mut s = y[0] + y[1] + y[2] + y[3];
    for xi in &x[4..9] {
        s += st_term(*xi);
    }
    -s
}

fn styblinski_tang_verbatim_g0<T: Real>(x: &[T], y: &[T]) -> T {
    let mut s = y[0] + y[1] + y[2] + y[3];
    for xi in &x[4..9] {
        s += xi.powi(4) * 0.5 - *xi * *xi * 16.0 + *xi * 5.0;
    }
    -s
}

pub(super) fn styblinski_tang(variant: Option<&str>) -> Result<CompositeProblem> {
    let (g0, opt) = match variant {
        None => (
            outer!(styblinski_tang_g0, linear),
            Some(KnownOptimum::corrected(
                352.495_491_333_942_6,
                Some(vec![-2.903_534; 9]),
                "half factor applied to the whole bracket of the explicit sum, matching the black-box terms",
            )),
        ),
        Some("verbatim") => (outer!(styblinski_tang_verbatim_g0, linear), None),
        Some(v) => return Err(unknown_variant("styblinski-tang", v, &["verbatim"])),
    };
    CompositeProblem::new(
        "styblinski-tang",
        uniform_box(9, -5.0, 5.0),
        4,
        bb(|x| (0..4).map(|i| st_term(x[i])).collect()),
        vec![g0],
        opt,
    )
}

// ------------------------------------------------------------------ constrained

fn bazaraa_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * x[0] * 2.0 + x[1] * x[1] * 2.0 - y[1])
}
fn bazaraa_g1<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * 5.0 + x[1] - 5.0)
}
fn bazaraa_g2<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] - x[0])
}

pub(super) fn bazaraa(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("bazaraa", variant)?;
    CompositeProblem::new(
        "bazaraa",
        uniform_box(2, 0.01, 1.0),
        2,
        bb(|x| vec![2.0 * x[1] * x[1], 2.0 * x[0] * x[1] + 6.0 * x[0] + 4.0 * x[1]]),
        vec![outer!(bazaraa_g0, linear), outer!(bazaraa_g1, linear), outer!(bazaraa_g2, linear)],
        Some(KnownOptimum::published(6.613, vec![0.868, 0.659]).with_tolerances(1e-2, 1e-2)),
    )
}

fn spring_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] * x[2] + y[0] * 2.0)
}
fn spring_g1<T: Real>(x: &[T], y: &[T]) -> T {
    y[1] / (x[0].powi(4) * 71785.0) - 1.0
}
fn spring_g2<T: Real>(x: &[T], _y: &[T]) -> T {
    let a = (x[1] * x[1] * 4.0 - x[0] * x[1]) / ((x[1] * x[0].powi(3) - x[0].powi(4)) * 12566.0);
    let b = (x[0] * x[0] * 5108.0).recip();
    -(a + b) + 1.0
}
fn spring_g3<T: Real>(x: &[T], y: &[T]) -> T {
    x[0] * x[1] * 140.45 / y[1] - 1.0
}
fn spring_g4<T: Real>(x: &[T], _y: &[T]) -> T {
    -((x[0] + x[1]) / 1.5) + 1.0
}

pub(super) fn spring(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("spring", variant)?;
    CompositeProblem::new(
        "spring",
        boxed(&[(0.05, 2.0), (0.25, 1.3), (2.0, 15.0)]),
        2,
        bb(|x| vec![x[0] * x[0] * x[1], x[1].powi(3) * x[2]]),
        vec![
            outer!(spring_g0, linear),
            outer!(spring_g1, linear),
            outer!(spring_g2, linear),
            outer!(spring_g3),
            outer!(spring_g4, linear),
        ],
        Some(
            KnownOptimum::corrected(
                -0.012_665_212_329_548_528,
                Some(vec![0.051_689, 0.356_718, 11.288_966]),
                "published constraints are garbled; standard tension/compression spring constraints used",
            )
            .with_tolerances(1e-6, 1e-5),
        ),
    )
}

fn ex314_g1_printed<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * y[0]) - x[1] * x[1] * 2.0 + x[0] * x[1] * 2.0 + x[1] * x[2] * 2.0 - x[0] * x[2] * 2.0 - x[2] * x[2] * 2.0
        + x[0] * 20.0
        - x[1] * 9.0
        + x[2] * 13.0
        - 24.0
}
fn ex314_g0<T: Real>(_x: &[T], y: &[T]) -> T {
    -y[1]
}
fn ex314_g1<T: Real>(x: &[T], y: &[T]) -> T {
    -ex314_g1_printed(x, y)
}
fn ex314_g2<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] + x[1] + x[2]) + 4.0
}
fn ex314_g3<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[1] * 3.0 + x[2]) + 6.0
}
fn ex314_verbatim_g0<T: Real>(_x: &[T], y: &[T]) -> T {
    y[1]
}
fn ex314_verbatim_g2<T: Real>(x: &[T], _y: &[T]) -> T {
    x[0] + x[2] + x[2] - 4.0
}
fn ex314_verbatim_g3<T: Real>(x: &[T], _y: &[T]) -> T {
    x[1] * 3.0 + x[2] - 6.0
}

pub(super) fn ex314(variant: Option<&str>) -> Result<CompositeProblem> {
    let (outers, opt) = match variant {
        None => (
            vec![outer!(ex314_g0, linear), outer!(ex314_g1, linear), outer!(ex314_g2, linear), outer!(ex314_g3, linear)],
            Some(KnownOptimum::corrected(
                4.0,
                Some(vec![0.5, 0.0, 3.0]),
                "objective and constraints sign-corrected, x6 read as x3; global maximum 4 verified",
            )),
        ),
        Some("verbatim") => (
            vec![
                outer!(ex314_verbatim_g0, linear),
                outer!(ex314_g1_printed, linear),
                outer!(ex314_verbatim_g2, linear),
                outer!(ex314_verbatim_g3, linear),
            ],
            None,
        ),
        Some(v) => return Err(unknown_variant("ex314", v, &["verbatim"])),
    };
    CompositeProblem::new(
        "ex314",
        boxed(&[(-2.0, 2.0), (0.0, 6.0), (-3.0, 3.0)]),
        2,
        bb(|x| vec![4.0 * x[0] - 2.0 * x[1] + 2.0 * x[2], x[1] - x[2] - 2.0 * x[0]]),
        outers,
        opt,
    )
}

fn rs_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * x[0] + x[1] * x[1] + x[3] * x[3] - x[0] * 5.0 - x[1] * 5.0 + y[0])
}
fn rs_g1<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * x[0]) - x[1] * x[1] - x[2] * x[2] - x[3] * x[3] - x[0] + x[1] - x[2] + x[3] + 8.0
}
fn rs_g2<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * x[0]) - x[1] * x[1] * 2.0 - y[1] + x[0] + x[3] + 10.0
}
fn rs_g3<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * x[0] * 2.0) - x[1] * x[1] - x[2] * x[2] - x[0] * 2.0 + x[1] + x[3] + 5.0
}

pub(super) fn rosen_suzuki(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("rosen-suzuki", variant)?;
    CompositeProblem::new(
        "rosen-suzuki",
        uniform_box(4, -2.0, 2.0),
        2,
        bb(|x| vec![2.0 * x[2] * x[2] - 21.0 * x[2] + 7.0 * x[3], x[2] * x[2] + 2.0 * x[3] * x[3]]),
        vec![outer!(rs_g0, linear), outer!(rs_g1, linear), outer!(rs_g2, linear), outer!(rs_g3, linear)],
        Some(KnownOptimum::published(44.0, vec![0.0, 1.0, 2.0, -1.0])),
    )
}

fn bpv_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[0] + x[1] * x[3])
}
fn bpv_g1<T: Real>(_x: &[T], y: &[T]) -> T {
    y[1] - 30.0
}
fn bpv_g2<T: Real>(_x: &[T], y: &[T]) -> T {
    y[2] - 20.0
}
fn bpv_g3<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[2] + x[3] - 15.0)
}

pub(super) fn st_bpv1(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("st_bpv1", variant)?;
    CompositeProblem::new(
        "st_bpv1",
        boxed(&[(0.0, 27.0), (0.0, 16.0), (0.0, 10.0), (0.0, 10.0)]),
        3,
        bb(|x| vec![x[0] * x[2], x[0] + 3.0 * x[1], 2.0 * x[0] + x[1]]),
        vec![outer!(bpv_g0, linear), outer!(bpv_g1, linear), outer!(bpv_g2, linear), outer!(bpv_g3, linear)],
        Some(KnownOptimum::corrected(
            0.0,
            Some(vec![27.0, 1.0, 0.0, 0.0]),
            "published -10 at [27,1,0,10] is dominated; objective is non-positive and 0 is attained",
        )),
    )
}

fn ex211_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * 42.0 - y[0] * 50.0 + x[1] * 44.0 + x[2] * 45.0 + x[3] * 47.0 + x[4] * 47.5)
}
fn ex211_g1<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * 20.0 + y[1] + x[4] * 4.0 - 39.0)
}

pub(super) fn ex211(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("ex211", variant)?;
    CompositeProblem::new(
        "ex211",
        uniform_box(5, 0.0, 1.0),
        2,
        bb(|x| vec![x.iter().map(|v| v * v).sum(), 12.0 * x[1] + 11.0 * x[2] + 7.0 * x[3]]),
        vec![outer!(ex211_g0, linear), outer!(ex211_g1, linear)],
        Some(KnownOptimum::published(17.0, vec![1.0, 1.0, 0.0, 1.0, 0.0])),
    )
}

fn ex212_g0<T: Real>(x: &[T], y: &[T]) -> T {
    let mut s = T::from(0.0);
    for xi in &x[..5] {
        s += *xi * *xi;
    }
    x[5] * 10.0 + y[0] + s * 0.5
}
fn ex212_g1<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * 6.0 + x[1] * 3.0 + x[2] * 3.0 + x[3] * 2.0 + x[4] - 6.5)
}
fn ex212_g2<T: Real>(_x: &[T], y: &[T]) -> T {
    -(y[1] - 20.0)
}

pub(super) fn ex212(variant: Option<&str>) -> Result<CompositeProblem> {
    let (bounds, opt) = match variant {
        None => (
            boxed(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 30.0)]),
            KnownOptimum::corrected(213.0, Some(vec![0.0, 1.0, 0.0, 1.0, 1.0, 20.0]), "x1..x5 restricted to [0,1]"),
        ),
        Some("verbatim") => (
            uniform_box(6, 0.0, 30.0),
            KnownOptimum::computed(230.875, Some(vec![0.0, 0.0, 0.0, 0.0, 6.5, 20.0]), "global maximum with the published box"),
        ),
        Some(v) => return Err(unknown_variant("ex212", v, &["verbatim"])),
    };
    CompositeProblem::new(
        "ex212",
        bounds,
        2,
        bb(|x| {
            vec![
                10.5 * x[0] + 7.5 * x[1] + 3.5 * x[2] + 2.5 * x[3] + 1.5 * x[4],
                10.0 * x[0] + 10.0 * x[2] + x[5],
            ]
        }),
        vec![outer!(ex212_g0, linear), outer!(ex212_g1, linear), outer!(ex212_g2, linear)],
        Some(opt),
    )
}

fn g09_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -y[0] - x[2].powi(4) - sq(x[3] - 11.0) * 3.0 - x[4].powi(6) * 10.0 - x[5] * x[5] * 7.0 - x[6].powi(4)
        + x[5] * x[6] * 4.0
        + x[5] * 10.0
        + x[6] * 8.0
}
fn g09_g1<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * x[0] * 2.0) - y[1] - x[4] * 5.0 + 127.0
}
fn g09_g1_verbatim<T: Real>(x: &[T], y: &[T]) -> T {
    -(x[0] * x[1] * 2.0) - y[1] - x[4] * 5.0 + 127.0
}
fn g09_g2<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * 7.0) - x[1] * 3.0 - x[2] * x[2] * 10.0 - x[3] + x[4] + 282.0
}
fn g09_g3<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * 23.0) - x[1] * x[1] - x[5] * x[5] * 6.0 + x[6] * 8.0 + 196.0
}
fn g09_g3_verbatim<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * 23.0) + x[1] * x[1] - x[5] * x[5] * 6.0 + x[6] * 8.0 + 196.0
}
fn g09_g4<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * x[0] * 4.0) - x[1] * x[1] + x[0] * x[1] * 3.0 - x[2] * x[2] * 2.0 - x[5] * 5.0 + x[6] * 11.0
}

pub(super) fn g09(variant: Option<&str>) -> Result<CompositeProblem> {
    let (g1, g3, opt) = match variant {
        None => (
            outer!(g09_g1, linear),
            outer!(g09_g3, linear),
            KnownOptimum::corrected(
                -680.630_057_374_402,
                Some(vec![2.330_499, 1.951_372, -0.477_541_4, 4.365_726, -0.624_487_0, 1.038_131, 1.594_227]),
                "standard G09 constraint terms 2x1^2 and -x2^2; published x* rounded to two decimals",
            )
            .with_tolerances(1e-3, 1e-6),
        ),
        Some("verbatim") => (
            outer!(g09_g1_verbatim, linear),
            outer!(g09_g3_verbatim, linear),
            KnownOptimum::computed(-678.105_040_362_379, None, "global maximum of the literal constraint terms"),
        ),
        Some(v) => return Err(unknown_variant("g09", v, &["verbatim"])),
    };
    CompositeProblem::new(
        "g09",
        uniform_box(7, -10.0, 10.0),
        2,
        bb(|x| {
            vec![
                (x[0] - 10.0).powi(2) + 5.0 * (x[1] - 12.0).powi(2),
                3.0 * x[1].powi(4) + x[2] + 4.0 * x[3] * x[3],
            ]
        }),
        vec![outer!(g09_g0, linear), g1, outer!(g09_g2, linear), g3, outer!(g09_g4, linear)],
        Some(opt),
    )
}

fn ex724_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[2] + (x[1] / x[7]).powf(0.67) * 0.4 - x[0] + 10.0)
}
fn ex724_g1<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[4] * x[6] * 0.0588 + x[0] * 0.1 - 1.0)
}
fn ex724_g2<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[5] * x[7] * 0.0588 + x[0] * 0.1 + x[1] * 0.1 - 1.0)
}
fn ex724_g3<T: Real>(x: &[T], y: &[T]) -> T {
    -((x[2] / x[4]) * 4.0 + y[0].recip() * 2.0 + (x[6] / x[2]).powf(1.3) * 0.0588 - 1.0)
}
fn ex724_g4<T: Real>(x: &[T], y: &[T]) -> T {
    -(y[1] + x[3].powf(1.3) * x[7] * 0.0588 - 1.0)
}

pub(super) fn ex724(variant: Option<&str>) -> Result<CompositeProblem> {
    no_variants("ex724", variant)?;
    CompositeProblem::new(
        "ex724",
        uniform_box(8, 0.1, 10.0),
        3,
        bb(|x| {
            vec![
                x[2].powf(0.71) * x[4],
                4.0 * (x[3] / x[5]) + 2.0 / (x[3].powf(0.71) * x[5]),
                0.4 * (x[0] / x[6]).powf(0.67) - x[1],
            ]
        }),
        vec![
            outer!(ex724_g0, linear),
            outer!(ex724_g1, linear),
            outer!(ex724_g2, linear),
            outer!(ex724_g3),
            outer!(ex724_g4, linear),
        ],
        Some(
            KnownOptimum::corrected(
                -3.918_866,
                Some(vec![6.35, 2.34, 0.67, 0.53, 5.95, 5.32, 1.04, 0.42]),
                "published -3.92 and x* are rounded; value refined numerically",
            )
            .with_tolerances(1e-2, 2e-3),
        ),
    )
}

fn ex216_g0_printed<T: Real>(x: &[T], y: &[T]) -> T {
    let mut s = T::from(0.0);
    for xi in &x[4..10] {
        s += *xi * *xi;
    }
    x[0] * 48.0 - y[0] * 0.5 - s * 50.0 + x[1] * 42.0 + y[2] + x[6] * 47.0 + x[7] * 42.0 + x[8] * 45.0 + x[9] * 46.0
}
fn ex216_g1_printed<T: Real>(x: &[T], y: &[T]) -> T {
    y[1] - x[6] * 2.0 - x[7] * 6.0 - x[8] * 2.0 - x[9] * 2.0 + 4.0
}
fn ex216_g2_printed<T: Real>(x: &[T], _y: &[T]) -> T {
    x[0] * 6.0 - x[1] * 5.0 + x[2] * 8.0 - x[3] * 3.0 + x[5] + x[6] * 3.0 + x[7] * 8.0 + x[8] * 9.0 - x[9] * 3.0 - 22.0
}
fn ex216_g3_printed<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * 5.0) + x[1] * 6.0 + x[2] * 5.0 + x[3] * 3.0 + x[4] * 8.0 - x[5] * 8.0 + x[6] * 9.0 + x[7] * 2.0 - x[9] * 9.0 + 6.0
}
fn ex216_g4_printed<T: Real>(x: &[T], y: &[T]) -> T {
    y[3] + x[6] * 3.0 - x[7] * 9.0 - x[8] * 9.0 - x[9] * 3.0 + 23.0
}
fn ex216_g5_printed<T: Real>(x: &[T], _y: &[T]) -> T {
    -(x[0] * 8.0) + x[1] * 7.0 - x[2] * 4.0 - x[3] * 5.0 - x[4] * 9.0 + x[5] - x[6] * 7.0 - x[7] + x[8] * 3.0 - x[9] * 2.0
        + 12.0
}
fn ex216_g0<T: Real>(x: &[T], y: &[T]) -> T {
    -ex216_g0_printed(x, y)
}
fn ex216_g1<T: Real>(x: &[T], y: &[T]) -> T {
    -ex216_g1_printed(x, y)
}
fn ex216_g2<T: Real>(x: &[T], y: &[T]) -> T {
    -ex216_g2_printed(x, y)
}
fn ex216_g3<T: Real>(x: &[T], y: &[T]) -> T {
    -ex216_g3_printed(x, y)
}
fn ex216_g4<T: Real>(x: &[T], y: &[T]) -> T {
    -ex216_g4_printed(x, y)
}
fn ex216_g5<T: Real>(x: &[T], y: &[T]) -> T {
    -ex216_g5_printed(x, y)
}

fn ex216_h(x: &[f64], second_sign: f64) -> Vec<f64> {
    vec![
        100.0 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]),
        -2.0 * x[0] + second_sign * 6.0 * x[1] - x[2] - 3.0 * x[4] - 3.0 * x[5],
        48.0 * x[2] + 45.0 * x[3] + 44.0 * x[4] + 41.0 * x[5],
        9.0 * x[0] + 5.0 * x[1] - 9.0 * x[3] + x[4] - 8.0 * x[5],
    ]
}

pub(super) fn ex216(variant: Option<&str>) -> Result<CompositeProblem> {
    let (h, outers, opt) = match variant {
        None => (
            bb(|x| ex216_h(x, -1.0)),
            vec![
                outer!(ex216_g0, linear),
                outer!(ex216_g1, linear),
                outer!(ex216_g2, linear),
                outer!(ex216_g3, linear),
                outer!(ex216_g4, linear),
                outer!(ex216_g5, linear),
            ],
            Some(KnownOptimum::corrected(
                39.0,
                Some(vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0]),
                "malformed term read as -2x1 - 6x2; objective and constraints negated so x* is the global maximum",
            )),
        ),
        Some("verbatim") => (
            bb(|x| ex216_h(x, 1.0)),
            vec![
                outer!(ex216_g0_printed, linear),
                outer!(ex216_g1_printed, linear),
                outer!(ex216_g2_printed, linear),
                outer!(ex216_g3_printed, linear),
                outer!(ex216_g4_printed, linear),
                outer!(ex216_g5_printed, linear),
            ],
            None,
        ),
        Some(v) => return Err(unknown_variant("ex216", v, &["verbatim"])),
    };
    CompositeProblem::new("ex216", uniform_box(10, 0.0, 1.0), 4, h, outers, opt)
}

#[cfg(test)]
mod tests {
    #[test]
    fn table_dimensions() {
        let dims = [
            ("booth", 2, 1, 0),
            ("wolfe", 3, 1, 0),
            ("rastrigin", 3, 2, 0),
            ("colville", 4, 1, 0),
            ("friedman", 5, 1, 0),
            ("dolan", 5, 2, 0),
            ("rosenbrock", 6, 4, 0),
            ("zakharov", 7, 1, 0),
            ("powell", 8, 4, 0),
            ("styblinski-tang", 9, 4, 0),
            ("bazaraa", 2, 2, 2),
            ("spring", 3, 2, 4),
            ("ex314", 3, 2, 3),
            ("rosen-suzuki", 4, 2, 3),
            ("st_bpv1", 4, 3, 3),
            ("ex211", 5, 2, 1),
            ("ex212", 6, 2, 2),
            ("g09", 7, 2, 4),
            ("ex724", 8, 3, 4),
            ("ex216", 10, 4, 5),
        ];
        for (name, d, m, n) in dims {
            let p = super::super::get(name).unwrap();
            assert_eq!((p.d(), p.m(), p.n()), (d, m, n), "{name}");
        }
    }

    #[test]
    fn variants_build() {
        for v in ["rosenbrock:verbatim", "styblinski-tang:verbatim", "ex314:verbatim", "ex212:verbatim", "g09:verbatim", "ex216:verbatim"] {
            let p = super::super::get(v).unwrap();
            p.verify_optimum().unwrap();
            assert_eq!(p.name, v);
        }
    }

    #[test]
    fn g09_published_point_within_half() {
        let p = super::super::get("g09").unwrap();
        let f = p.evaluate(&[2.33, 1.95, -0.48, 4.37, -0.62, 1.04, 1.59]).unwrap();
        assert!((f[0] + 680.63).abs() < 0.5);
    }

    #[test]
    fn linear_flags_are_honest() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for name in super::super::names() {
            let p = super::super::get(name).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = p.bounds.lower.iter().zip(&p.bounds.upper).map(|(l, u)| rng.random_range(*l..=*u)).collect();
                let y: Vec<f64> = (0..p.m()).map(|_| rng.random_range(0.5..2.0)).collect();
                for g in p.outers() {
                    if let Some(lf) = g.linear_form(&x) {
                        let v: f64 = lf.a.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + lf.b;
                        let e = g.eval(&x, &y);
                        assert!((v - e).abs() <= 1e-10 * e.abs().max(1.0), "{name} g{}: {v} vs {e}", g.index());
                    }
                }
            }
        }
    }
}
