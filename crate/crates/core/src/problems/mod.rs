//! Benchmark problem registry.
//!
//! Every problem is a composite `g_i(x, h(x))` with an expensive black box `h`
//! and cheap known outer functions. Index 0 is the objective (maximized);
//! indices `1..=n` are constraints of the form `g_i >= 0`.
//!
//! Names may carry a variant suffix, e.g. `ex314:verbatim`, selecting an
//! alternative reading of the published formulation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outer::{CompositeOuter, OuterDef, MAX_LANES};
use crate::space::Bounds;

pub mod environmental;
mod synthetic;
pub mod williams_otto;

pub use environmental::environmental_concentration;
pub use williams_otto::{williams_otto_blackbox, williams_otto_reference};

pub type BlackBox = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Where a recorded optimum comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimumSource {
    /// Matches the published value and point.
    Published,
    /// Published value or point was inconsistent with the formulation; the
    /// recorded value was recomputed.
    Corrected(String),
    /// No published value; computed numerically.
    Computed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub value: f64,
    pub x: Option<Vec<f64>>,
    pub source: OptimumSource,
    /// Tolerance on `|g_0(x*) - value|` at registration.
    pub value_tol: f64,
    /// Largest admissible constraint violation at `x*`.
    pub feasibility_tol: f64,
}

impl KnownOptimum {
    pub fn published(value: f64, x: Vec<f64>) -> Self {
        Self { value, x: Some(x), source: OptimumSource::Published, value_tol: 1e-4, feasibility_tol: 1e-6 }
    }

    pub fn corrected(value: f64, x: Option<Vec<f64>>, note: &str) -> Self {
        Self { value, x, source: OptimumSource::Corrected(note.into()), value_tol: 1e-4, feasibility_tol: 1e-6 }
    }

    pub fn computed(value: f64, x: Option<Vec<f64>>, note: &str) -> Self {
        Self { value, x, source: OptimumSource::Computed(note.into()), value_tol: 1e-4, feasibility_tol: 1e-6 }
    }

    pub fn with_tolerances(mut self, value_tol: f64, feasibility_tol: f64) -> Self {
        self.value_tol = value_tol;
        self.feasibility_tol = feasibility_tol;
        self
    }
}

/// A composite optimization problem `max g_0(x, h(x)) s.t. g_i(x, h(x)) >= 0`.
#[derive(Clone)]
pub struct CompositeProblem {
    pub name: String,
    pub bounds: Bounds,
    m: usize,
    black_box: BlackBox,
    outers: Vec<OuterDef>,
    pub known_optimum: Option<KnownOptimum>,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("name", &self.name)
            .field("d", &self.d())
            .field("m", &self.m)
            .field("n", &self.n())
            .field("known_optimum", &self.known_optimum)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        name: impl Into<String>,
        bounds: Bounds,
        m: usize,
        black_box: BlackBox,
        outers: Vec<OuterDef>,
        known_optimum: Option<KnownOptimum>,
    ) -> Result<Self> {
        let name = name.into();
        if outers.is_empty() {
            return Err(Error::InvalidArgument(format!("{name}: at least an objective is required")));
        }
        if m == 0 {
            return Err(Error::InvalidArgument(format!("{name}: black box must have at least one output")));
        }
        if bounds.dim() + m > MAX_LANES {
            return Err(Error::InvalidArgument(format!("{name}: d + m exceeds {MAX_LANES}")));
        }
        Ok(Self { name, bounds, m, black_box, outers, known_optimum })
    }

    pub fn d(&self) -> usize {
        self.bounds.dim()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of constraints.
    pub fn n(&self) -> usize {
        self.outers.len() - 1
    }

    pub fn outer(&self, i: usize) -> CompositeOuter<'_> {
        CompositeOuter::new(&self.outers[i], i, self.d(), self.m)
    }

    pub fn outer_def(&self, i: usize) -> OuterDef {
        self.outers[i]
    }

    pub fn outers(&self) -> impl Iterator<Item = CompositeOuter<'_>> {
        (0..self.outers.len()).map(move |i| self.outer(i))
    }

    /// Noise-free black-box evaluation.
    pub fn h(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: x.len() });
        }
        let y = (self.black_box)(x)?;
        if y.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: y.len() });
        }
        Ok(y)
    }

    /// `g_i(x, y)` for all `i` on a given black-box output.
    pub fn compose(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.outers.iter().map(|o| (o.value)(x, y)).collect()
    }

    /// Noise-free `f_i(x) = g_i(x, h(x))` for all `i`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.h(x)?;
        Ok(self.compose(x, &y))
    }

    /// Checks the recorded optimizer against the formulation.
    pub fn verify_optimum(&self) -> Result<()> {
        let Some(opt) = &self.known_optimum else { return Ok(()) };
        let Some(x) = &opt.x else { return Ok(()) };
        let f = self.evaluate(x)?;
        if (f[0] - opt.value).abs() > opt.value_tol {
            return Err(Error::Evaluation(format!(
                "{}: objective {} at recorded optimizer differs from {} by more than {}",
                self.name, f[0], opt.value, opt.value_tol
            )));
        }
        for (i, v) in f.iter().enumerate().skip(1) {
            if *v < -opt.feasibility_tol {
                return Err(Error::Evaluation(format!("{}: constraint {i} = {v} violated at recorded optimizer", self.name)));
            }
        }
        Ok(())
    }
}

type Builder = fn(Option<&str>) -> Result<CompositeProblem>;

const REGISTRY: &[(&str, Builder)] = &[
    ("booth", synthetic::booth),
    ("wolfe", synthetic::wolfe),
    ("rastrigin", synthetic::rastrigin),
    ("colville", synthetic::colville),
    ("friedman", synthetic::friedman),
    ("dolan", synthetic::dolan),
    ("rosenbrock", synthetic::rosenbrock),
    ("zakharov", synthetic::zakharov),
    ("powell", synthetic::powell),
    ("styblinski-tang", synthetic::styblinski_tang),
    ("bazaraa", synthetic::bazaraa),
    ("spring", synthetic::spring),
    ("ex314", synthetic::ex314),
    ("rosen-suzuki", synthetic::rosen_suzuki),
    ("st_bpv1", synthetic::st_bpv1),
    ("ex211", synthetic::ex211),
    ("ex212", synthetic::ex212),
    ("g09", synthetic::g09),
    ("ex724", synthetic::ex724),
    ("ex216", synthetic::ex216),
    ("env-model", environmental::problem),
    ("williams-otto", williams_otto::problem),
];

/// The ten unconstrained synthetic problems.
pub const UNCONSTRAINED: [&str; 10] =
    ["booth", "wolfe", "rastrigin", "colville", "friedman", "dolan", "rosenbrock", "zakharov", "powell", "styblinski-tang"];

/// The ten constrained synthetic problems.
pub const CONSTRAINED: [&str; 10] =
    ["bazaraa", "spring", "ex314", "rosen-suzuki", "st_bpv1", "ex211", "ex212", "g09", "ex724", "ex216"];

/// All registered problem names, in table order.
pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Problems kept outside the benchmark tables, such as the infeasible toy.
pub const EXTRA: [&str; 1] = ["infeasible-toy"];

/// Looks up a problem by name, optionally suffixed with `:variant`.
pub fn get(name: &str) -> Result<CompositeProblem> {
    let (base, variant) = match name.split_once(':') {
        Some((b, v)) => (b, Some(v)),
        None => (name, None),
    };
    if base == EXTRA[0] {
        if let Some(v) = variant {
            return Err(unknown_variant(base, v, &[]));
        }
        return Ok(infeasible_toy());
    }
    let builder = REGISTRY.iter().find(|(n, _)| *n == base).map(|(_, b)| *b).ok_or_else(|| Error::UnknownProblem {
        name: name.to_string(),
        available: names().into_iter().chain(EXTRA).collect::<Vec<_>>().join(", "),
    })?;
    let mut problem = builder(variant)?;
    if variant.is_some() {
        problem.name = name.to_string();
    }
    Ok(problem)
}

pub(crate) fn unknown_variant(base: &str, variant: &str, known: &[&str]) -> Error {
    Error::UnknownProblem {
        name: format!("{base}:{variant}"),
        available: if known.is_empty() {
            format!("{base} (no variants)")
        } else {
            known.iter().map(|v| format!("{base}:{v}")).collect::<Vec<_>>().join(", ")
        },
    }
}

/// A problem whose only constraint `g_1 = -1 - h(x)^2` can never be satisfied.
pub fn infeasible_toy() -> CompositeProblem {
    use crate::outer::Real;
    fn g0<T: Real>(_x: &[T], y: &[T]) -> T {
        y[0]
    }
    fn g1<T: Real>(_x: &[T], y: &[T]) -> T {
        -(y[0] * y[0]) - 1.0
    }
    CompositeProblem::new(
        "infeasible-toy",
        Bounds::from_pairs(&[(-2.0, 2.0)]).expect("valid box"),
        1,
        Arc::new(|x: &[f64]| Ok(vec![(3.0 * x[0]).sin() + 0.5 * x[0]])),
        vec![crate::outer!(g0, linear), crate::outer!(g1)],
        None,
    )
    .expect("valid problem")
}
