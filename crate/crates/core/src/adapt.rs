//! Goal-oriented adaptive loop: mark, refine, stop on the bound gap.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::bounds::BoundsResult;
use crate::data::{OutputFunctional, ProblemData};
use crate::error::{Error, Result};
use crate::mesh::{refine_bisection, refine_red, Mesh};
use crate::pipeline::{evaluate, Evaluation, Settings};
use crate::problems::Refiner;

/// Which elements to refine given the local gap contributions `Δ_h^K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkingStrategy {
    /// Every element.
    Uniform,
    /// `Δ_h^K ≥ Δ_tol / n_el`.
    ErrorDistribution(f64),
    /// Smallest set carrying a fraction `Θ` of the total gap.
    Bulk(f64),
}

impl MarkingStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform => Ok(()),
            Self::ErrorDistribution(t) if t > 0.0 && t.is_finite() => Ok(()),
            Self::ErrorDistribution(t) => Err(Error::InvalidParameter(format!(
                "error-distribution target must be > 0, got {t}"
            ))),
            Self::Bulk(theta) if theta > 0.0 && theta <= 1.0 => Ok(()),
            Self::Bulk(theta) => Err(Error::InvalidParameter(format!(
                "bulk fraction must lie in (0, 1], got {theta}"
            ))),
        }
    }
}

impl fmt::Display for MarkingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "uniform"),
            Self::ErrorDistribution(t) => write!(f, "tol:{t}"),
            Self::Bulk(theta) => write!(f, "bulk:{theta}"),
        }
    }
}

impl FromStr for MarkingStrategy {
    type Err = Error;

    /// `uniform`, `tol:<Δ>` or `bulk:<Θ>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse number {v:?} in strategy {s:?}")))
        };
        let strategy = match s.split_once(':') {
            None if s.eq_ignore_ascii_case("uniform") => Self::Uniform,
            Some((k, v)) if k.eq_ignore_ascii_case("tol") => Self::ErrorDistribution(num(v)?),
            Some((k, v)) if k.eq_ignore_ascii_case("bulk") => Self::Bulk(num(v)?),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown strategy {s:?}; expected uniform, tol:<gap> or bulk:<fraction>"
                )))
            }
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

/// Indices of the elements to refine, in increasing order.
pub fn mark(gaps: &[f64], strategy: &MarkingStrategy) -> Vec<usize> {
    match *strategy {
        MarkingStrategy::Uniform => (0..gaps.len()).collect(),
        MarkingStrategy::ErrorDistribution(tol) => {
            let threshold = tol / gaps.len().max(1) as f64;
            (0..gaps.len()).filter(|&k| gaps[k] > 0.0 && gaps[k] >= threshold).collect()
        }
        MarkingStrategy::Bulk(theta) => {
            let total: f64 = gaps.iter().sum();
            if !(total > 0.0) {
                return Vec::new();
            }
            let mut order: Vec<usize> = (0..gaps.len()).collect();
            // Stable sort keeps ties in element order.
            order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]));
            let goal = theta * total;
            let mut acc = 0.0;
            let mut out = Vec::new();
            for k in order {
                if acc >= goal || gaps[k] <= 0.0 {
                    break;
                }
                acc += gaps[k];
                out.push(k);
            }
            out.sort_unstable();
            out
        }
    }
}

/// `−2 ln(e1/e2) / ln(n1/n2)`; `None` when undefined.
pub fn convergence_order(e1: f64, n1: usize, e2: f64, n2: usize) -> Option<f64> {
    if !(e1 > 0.0 && e2 > 0.0) || n1 == n2 || n1 == 0 || n2 == 0 {
        return None;
    }
    Some(-2.0 * (e1 / e2).ln() / (n1 as f64 / n2 as f64).ln())
}

/// How the next mesh is produced.
#[derive(Debug, Clone, Copy)]
pub enum Refinement {
    /// Refine the marked elements of the current mesh.
    Local(Refiner),
    /// Regenerate a structured mesh for the next level; only valid with
    /// [`MarkingStrategy::Uniform`].
    Structured(fn(usize) -> Mesh),
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub settings: Settings,
    pub strategy: MarkingStrategy,
    pub refinement: Refinement,
    /// Stop once the full gap `s_h^+ − s_h^-` falls below this value.
    pub target: f64,
    pub max_iterations: usize,
}

impl AdaptiveOptions {
    pub const DEFAULT_MAX_ITERATIONS: usize = 40;

    pub fn new(settings: Settings, strategy: MarkingStrategy, refiner: Refiner, target: f64) -> Self {
        Self {
            settings,
            strategy,
            refinement: Refinement::Local(refiner),
            target,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        if !(self.target > 0.0 && self.target.is_finite()) {
            return Err(Error::InvalidParameter(format!("target must be > 0, got {}", self.target)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        if matches!(self.refinement, Refinement::Structured(_)) && self.strategy != MarkingStrategy::Uniform {
            return Err(Error::InvalidParameter(
                "structured mesh sequences only support uniform refinement".into(),
            ));
        }
        Ok(())
    }
}

/// One pass of the loop.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub nel: usize,
    pub n_edge: usize,
    pub bounds: BoundsResult,
    pub s_h: f64,
    /// Elements marked for refinement after this pass; 0 on the last one.
    pub marked: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub final_mesh: Mesh,
    /// Full evaluation on the final mesh.
    pub final_evaluation: Evaluation,
}

impl AdaptiveRun {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a run has at least one record")
    }

    /// Half-gap order between consecutive records.
    pub fn orders(&self) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.records.windows(2) {
            out.push(convergence_order(
                w[1].bounds.half_gap,
                w[1].nel,
                w[0].bounds.half_gap,
                w[0].nel,
            ));
        }
        out
    }
}

pub fn adaptive_loop(
    mesh0: &Mesh,
    data: &ProblemData,
    out: &OutputFunctional,
    options: &AdaptiveOptions,
) -> Result<AdaptiveRun> {
    adaptive_loop_with(mesh0, data, out, options, |_, _, _| {})
}

/// [`adaptive_loop`] with a callback receiving every pass together with its
/// mesh and evaluation.
pub fn adaptive_loop_with(
    mesh0: &Mesh,
    data: &ProblemData,
    out: &OutputFunctional,
    options: &AdaptiveOptions,
    mut on_iteration: impl FnMut(&IterationRecord, &Mesh, &Evaluation),
) -> Result<AdaptiveRun> {
    options.validate()?;
    let mut mesh = mesh0.clone();
    let mut records = Vec::new();
    for iteration in 0..options.max_iterations {
        let start = Instant::now();
        let eval = evaluate(&mesh, data, out, &options.settings)?;
        let gap = eval.bounds.s_plus - eval.bounds.s_minus;
        let done = gap < options.target;
        let last = iteration + 1 == options.max_iterations;
        let marks = if done || last {
            Vec::new()
        } else {
            mark(&eval.bounds.gaps, &options.strategy)
        };
        let record = IterationRecord {
            iteration,
            nel: eval.nel,
            n_edge: eval.n_edge,
            bounds: eval.bounds.clone(),
            s_h: eval.s_h,
            marked: marks.len(),
            seconds: start.elapsed().as_secs_f64(),
        };
        on_iteration(&record, &mesh, &eval);
        records.push(record);
        if done || last || marks.is_empty() {
            return Ok(AdaptiveRun {
                records,
                converged: done,
                final_mesh: mesh,
                final_evaluation: eval,
            });
        }
        mesh = match options.refinement {
            Refinement::Local(Refiner::Red) => refine_red(&mesh, &marks)?,
            Refinement::Local(Refiner::Bisect) => refine_bisection(&mesh, &marks)?,
            Refinement::Structured(level) => level(iteration + 1),
        };
    }
    unreachable!("the loop returns on its last iteration")
}
