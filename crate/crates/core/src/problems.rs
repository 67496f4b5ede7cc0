//! Built-in benchmark problems.

use std::f64::consts::PI;

use crate::data::{DataFn, OutputFunctional, ProblemData};
use crate::error::{Error, Result};
use crate::adapt::{MarkingStrategy, Refinement};
use crate::mesh::{crisscross, lshape_initial, unit_square_crisscross, Mesh};

/// Mesh refinement mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refiner {
    /// Subdivision into four similar triangles with conforming closure.
    Red,
    /// Recursive longest-edge bisection.
    #[serde(alias = "bisection")]
    Bisect,
}

type ExactFn = fn([f64; 2]) -> f64;

/// A problem with its output functional and reference values.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub mesh: Mesh,
    pub data: ProblemData,
    pub output: OutputFunctional,
    pub exact_output: Option<f64>,
    pub exact_solution: Option<ExactFn>,
    pub refiner: Refiner,
    /// Structured mesh for each uniform level, when the benchmark uses one.
    pub uniform_levels: Option<fn(usize) -> Mesh>,
}

impl Problem {
    /// Benchmark refinement for a marking strategy: the structured sequence for
    /// uniform studies when available, local refinement otherwise.
    pub fn refinement_for(&self, strategy: &MarkingStrategy) -> Refinement {
        match (strategy, self.uniform_levels) {
            (MarkingStrategy::Uniform, Some(levels)) => Refinement::Structured(levels),
            _ => Refinement::Local(self.refiner),
        }
    }
}

pub const BUILTIN_IDS: [&str; 4] = ["example1_s1", "example1_s2", "example2_s1", "example2_s2"];

fn sine_source() -> DataFn {
    DataFn::new(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()).with_grad(|x| {
        let c = 2.0 * PI * PI * PI;
        [
            c * (PI * x[0]).cos() * (PI * x[1]).sin(),
            c * (PI * x[0]).sin() * (PI * x[1]).cos(),
        ]
    })
}

fn on_right_edge(x: [f64; 2]) -> bool {
    (x[0] - 1.0).abs() <= 1e-12
}

/// `(π/2) sin(πy)` on `x = 1`, zero on the rest of the boundary.
fn flux_weight() -> DataFn {
    DataFn::new(|x| if on_right_edge(x) { 0.5 * PI * (PI * x[1]).sin() } else { 0.0 })
        .with_grad(|x| {
            if on_right_edge(x) {
                [0.0, 0.5 * PI * PI * (PI * x[1]).cos()]
            } else {
                [0.0, 0.0]
            }
        })
        .with_segment_degree(|a, b| if on_right_edge(a) && on_right_edge(b) { None } else { Some(0) })
}

/// Steep output weight with a peak near `(0.25, 0.5)`.
pub fn steep_output_source() -> DataFn {
    DataFn::new(|x| {
        let a = -2.0 * x[0] + 0.5;
        let b = 2.0 * x[1] - 1.0;
        -3.0 * b / (1e-4 + (a * a + b * b).powf(2.5))
    })
}

pub fn builtin(id: &str) -> Result<Problem> {
    let unit = || ProblemData {
        f: DataFn::constant(1.0),
        ..Default::default()
    };
    let average = || OutputFunctional {
        f_o: DataFn::constant(1.0),
        ..Default::default()
    };
    let sine = || ProblemData {
        f: sine_source(),
        ..Default::default()
    };
    let exact_sine: ExactFn = |x| (PI * x[0]).sin() * (PI * x[1]).sin();
    // n × n criss-cross squares with n = 2, 4, 8, ...
    let square_levels: fn(usize) -> Mesh = |level| crisscross(2 << level);
    Ok(match id {
        "example1_s1" => Problem {
            name: id.into(),
            mesh: unit_square_crisscross(0),
            data: sine(),
            output: average(),
            exact_output: Some(4.0 / (PI * PI)),
            exact_solution: Some(exact_sine),
            refiner: Refiner::Red,
            uniform_levels: Some(square_levels),
        },
        "example1_s2" => Problem {
            name: id.into(),
            mesh: unit_square_crisscross(0),
            data: sine(),
            output: OutputFunctional {
                g_d_o: flux_weight(),
                ..Default::default()
            },
            exact_output: Some(PI * PI / 4.0),
            exact_solution: Some(exact_sine),
            refiner: Refiner::Red,
            uniform_levels: Some(square_levels),
        },
        "example2_s1" => Problem {
            name: id.into(),
            mesh: lshape_initial(),
            data: unit(),
            output: average(),
            exact_output: Some(0.2140758036140825),
            exact_solution: None,
            refiner: Refiner::Bisect,
            uniform_levels: None,
        },
        "example2_s2" => Problem {
            name: id.into(),
            mesh: lshape_initial(),
            data: unit(),
            output: OutputFunctional {
                f_o: steep_output_source(),
                ..Default::default()
            },
            exact_output: None,
            exact_solution: None,
            refiner: Refiner::Bisect,
            uniform_levels: None,
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown problem {other:?}; available: {}",
                BUILTIN_IDS.join(", ")
            )))
        }
    })
}
