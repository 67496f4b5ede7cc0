//! Python bindings: built-in and external problems, single evaluations and
//! adaptive studies.

use std::collections::BTreeMap;
use std::io::BufReader;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hdg::adapt::{self, adaptive_loop, AdaptiveOptions, MarkingStrategy, Refinement};
use hdg::bounds::BoundsResult;
use hdg::expr::parse_data;
use hdg::mesh::read_mesh;
use hdg::pipeline::{evaluate as evaluate_core, Settings};
use hdg::problems::{builtin, Refiner, BUILTIN_IDS};
use hdg::{Discretization, Error, OutputFunctional, ProblemData};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Parse { .. } | Error::Expr(_) | Error::Mesh(_) | Error::BadMark { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_refiner(s: &str) -> PyResult<Refiner> {
    match s.to_ascii_lowercase().as_str() {
        "red" => Ok(Refiner::Red),
        "bisect" | "bisection" => Ok(Refiner::Bisect),
        other => Err(PyValueError::new_err(format!("unknown refiner {other:?}; expected red or bisect"))),
    }
}

fn settings(p: usize, tau: f64, optimize: bool, quad_degree: Option<usize>) -> PyResult<Settings> {
    let mut s = Settings::new(p, tau).map_err(to_py)?;
    s.disc = Discretization { quad_degree, ..s.disc };
    s.optimize = optimize;
    Ok(s)
}

fn bounds_dict<'py>(py: Python<'py>, b: &BoundsResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("s_minus", b.s_minus)?;
    d.set_item("s_plus", b.s_plus)?;
    d.set_item("s_tilde", b.s_tilde)?;
    d.set_item("half_gap", b.half_gap)?;
    d.set_item("kappa", b.kappa)?;
    Ok(d)
}

/// A boundary value problem with its output functional.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: hdg::problems::Problem,
}

#[pymethods]
impl PyProblem {
    /// One of `builtin_ids()`.
    #[staticmethod]
    fn builtin(id: &str) -> PyResult<Self> {
        Ok(Self { inner: builtin(id).map_err(to_py)? })
    }

    /// Mesh file plus data expressions in `x` and `y`; omitted data is zero.
    #[staticmethod]
    #[pyo3(signature = (mesh, f=None, g_d=None, g_n=None, f_o=None, g_d_o=None, g_n_o=None, nu=None, exact_output=None, refiner="red"))]
    #[allow(clippy::too_many_arguments)]
    fn external(
        mesh: &str,
        f: Option<&str>,
        g_d: Option<&str>,
        g_n: Option<&str>,
        f_o: Option<&str>,
        g_d_o: Option<&str>,
        g_n_o: Option<&str>,
        nu: Option<BTreeMap<u32, f64>>,
        exact_output: Option<f64>,
        refiner: &str,
    ) -> PyResult<Self> {
        let nu = nu.unwrap_or_else(|| BTreeMap::from([(0, 1.0)]));
        let file = std::fs::File::open(mesh).map_err(|e| PyValueError::new_err(format!("cannot open {mesh}: {e}")))?;
        let mesh_data = read_mesh(BufReader::new(file), nu).map_err(to_py)?;
        let data = |s: Option<&str>| parse_data(s.unwrap_or("0")).map_err(to_py);
        Ok(Self {
            inner: hdg::problems::Problem {
                name: "external".into(),
                mesh: mesh_data,
                data: ProblemData { f: data(f)?, g_d: data(g_d)?, g_n: data(g_n)? },
                output: OutputFunctional { f_o: data(f_o)?, g_d_o: data(g_d_o)?, g_n_o: data(g_n_o)? },
                exact_output,
                exact_solution: None,
                refiner: parse_refiner(refiner)?,
                uniform_levels: None,
            },
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn exact_output(&self) -> Option<f64> {
        self.inner.exact_output
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.mesh.num_elements()
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, {} elements)", self.inner.name, self.inner.mesh.num_elements())
    }
}

#[pyfunction]
fn builtin_ids() -> Vec<&'static str> {
    BUILTIN_IDS.to_vec()
}

/// Bounds on the initial mesh of `problem`, with the per-element gaps.
#[pyfunction]
#[pyo3(signature = (problem, p, tau=1.0, optimize=false, quad_degree=None))]
fn evaluate<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    p: usize,
    tau: f64,
    optimize: bool,
    quad_degree: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = settings(p, tau, optimize, quad_degree)?;
    let pr = &problem.inner;
    let e = py.detach(|| evaluate_core(&pr.mesh, &pr.data, &pr.output, &s)).map_err(to_py)?;
    let d = bounds_dict(py, &e.bounds)?;
    d.set_item("s_h", e.s_h)?;
    d.set_item("nel", e.nel)?;
    d.set_item("n_edge", e.n_edge)?;
    d.set_item("gaps", e.bounds.gaps.clone())?;
    Ok(d)
}

/// Adaptive or uniform study; returns the per-iteration rows and whether the
/// target gap was reached.
#[pyfunction]
#[pyo3(signature = (problem, p, tau=1.0, strategy="uniform", refiner=None, target=1e-6, max_iter=40, optimize=false, quad_degree=None))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    p: usize,
    tau: f64,
    strategy: &str,
    refiner: Option<&str>,
    target: f64,
    max_iter: usize,
    optimize: bool,
    quad_degree: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let strategy: MarkingStrategy = strategy.parse().map_err(to_py)?;
    let pr = &problem.inner;
    let refinement = match refiner {
        Some(r) => Refinement::Local(parse_refiner(r)?),
        None => pr.refinement_for(&strategy),
    };
    let options = AdaptiveOptions {
        settings: settings(p, tau, optimize, quad_degree)?,
        strategy,
        refinement,
        target,
        max_iterations: max_iter,
    };
    let result = py.detach(|| adaptive_loop(&pr.mesh, &pr.data, &pr.output, &options)).map_err(to_py)?;
    let rows = result
        .records
        .iter()
        .zip(result.orders())
        .map(|(r, order)| {
            let d = bounds_dict(py, &r.bounds)?;
            d.set_item("nel", r.nel)?;
            d.set_item("n_edge", r.n_edge)?;
            d.set_item("s_h", r.s_h)?;
            d.set_item("marked", r.marked)?;
            d.set_item("order", order)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("rows", rows)?;
    out.set_item("converged", result.converged)?;
    out.set_item("exact_output", pr.exact_output)?;
    Ok(out)
}

/// `−2 ln(e1/e2) / ln(n1/n2)`, or `None` when undefined.
#[pyfunction]
fn convergence_order(e1: f64, n1: usize, e2: f64, n2: usize) -> Option<f64> {
    adapt::convergence_order(e1, n1, e2, n2)
}

#[pymodule]
fn hdg_bounds(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(builtin_ids, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_order, m)?)?;
    Ok(())
}
