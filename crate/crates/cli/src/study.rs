//! Executes a configured study and writes its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hdg_bounds::adapt::{adaptive_loop_with, convergence_order, AdaptiveOptions, Refinement};
use hdg_bounds::mesh::write_mesh;
use hdg_bounds::pipeline::Settings;
use hdg_bounds::problems::{Problem, Refiner};
use hdg_bounds::Discretization;
use serde::Serialize;

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_CONTAINMENT: i32 = 5;

pub const CSV_HEADER: &str =
    "nel,n_edge,s_minus,s_plus,s_tilde,half_gap,kappa,s_h,err_s_h,err_s_tilde,marked,strategy";

/// One pass of the study.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub nel: usize,
    pub n_edge: usize,
    pub s_minus: f64,
    pub s_plus: f64,
    pub s_tilde: f64,
    pub half_gap: f64,
    pub kappa: f64,
    pub s_h: f64,
    pub marked: usize,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    problem: &'a str,
    p: usize,
    tau: f64,
    strategy: String,
    refinement: &'static str,
    target: f64,
    max_iter: usize,
    optimize: bool,
    quad_degree: usize,
    iterations: usize,
    converged: bool,
    exact_output: Option<f64>,
    /// `pass`, `fail`, or `unknown` without a reference value.
    containment: &'static str,
    /// Row indices whose interval misses the reference value.
    violations: Vec<usize>,
    final_row: Option<&'a Row>,
    status: &'static str,
    exit_code: i32,
    error: Option<String>,
}

/// Slack for round-off when checking `s⁻ ≤ s ≤ s⁺`.
fn containment_slack(s: f64) -> f64 {
    1e-13 * (1.0 + s.abs())
}

fn refinement_name(r: &Refinement) -> &'static str {
    match r {
        Refinement::Structured(_) => "structured",
        Refinement::Local(Refiner::Red) => "red",
        Refinement::Local(Refiner::Bisect) => "bisect",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:e}"))
}

pub fn csv(rows: &[Row], exact: Option<f64>, strategy: &str) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{}",
            r.nel,
            r.n_edge,
            r.s_minus,
            r.s_plus,
            r.s_tilde,
            r.half_gap,
            r.kappa,
            r.s_h,
            opt(exact.map(|e| (e - r.s_h).abs())),
            opt(exact.map(|e| (e - r.s_tilde).abs())),
            r.marked,
            strategy
        );
    }
    s
}

/// Half-gap orders between consecutive rows; `None` for the first.
pub fn orders(rows: &[Row]) -> Vec<Option<f64>> {
    let mut out = vec![None; rows.len().min(1)];
    for w in rows.windows(2) {
        out.push(convergence_order(w[1].half_gap, w[1].nel, w[0].half_gap, w[0].nel));
    }
    out
}

fn report(config: &RunConfig, problem: &Problem, refinement: &str, rows: &[Row]) -> String {
    let exact = problem.exact_output;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "problem {}  p = {}  tau = {}  strategy {}  refinement {}  optimize {}",
        problem.name, config.p, config.tau, config.strategy, refinement, config.optimize
    );
    match exact {
        Some(e) => {
            let _ = writeln!(s, "exact output {e:.15}");
        }
        None => {
            let _ = writeln!(s, "exact output unknown");
        }
    }
    let _ = writeln!(
        s,
        "{:>8} {:>9} {:>18} {:>18} {:>18} {:>11} {:>7} {:>11} {:>11}",
        "nel", "n_edge", "s_minus", "s_plus", "s_tilde", "half_gap", "order", "|s-s_h|", "|s-s~_h|"
    );
    let dash = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for (r, o) in rows.iter().zip(orders(rows)) {
        let _ = writeln!(
            s,
            "{:>8} {:>9} {:>18.12} {:>18.12} {:>18.12} {:>11.3e} {:>7} {:>11} {:>11}",
            r.nel,
            r.n_edge,
            r.s_minus,
            r.s_plus,
            r.s_tilde,
            r.half_gap,
            dash(o.map(|o| format!("{o:.2}"))),
            dash(exact.map(|e| format!("{:.3e}", (e - r.s_h).abs()))),
            dash(exact.map(|e| format!("{:.3e}", (e - r.s_tilde).abs()))),
        );
    }
    s
}

fn gnuplot(rows: &[Row], exact: Option<f64>) -> String {
    let mut s = String::from("# nel n_edge half_gap err_s_h err_s_tilde\n");
    for r in rows {
        let err = |v: f64| exact.map_or("NaN".to_string(), |e| format!("{:e}", (e - v).abs()));
        let _ = writeln!(s, "{} {} {:e} {} {}", r.nel, r.n_edge, r.half_gap, err(r.s_h), err(r.s_tilde));
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Runs the study and returns the process exit code.
pub fn run(config: &RunConfig) -> i32 {
    let (problem, refinement) = match config.build_problem() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let settings = match Settings::new(config.p, config.tau) {
        Ok(mut s) => {
            s.disc = Discretization { quad_degree: config.quad_degree, ..s.disc };
            s.optimize = config.optimize;
            s
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let options = AdaptiveOptions {
        settings,
        strategy: config.strategy,
        refinement,
        target: config.target,
        max_iterations: config.max_iter,
    };
    if let Err(e) = options.validate() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if let Err(e) = fs::create_dir_all(&config.out) {
        eprintln!("error: cannot create {}: {e}", config.out.display());
        return EXIT_CONFIG;
    }

    let mut rows = Vec::new();
    let result = adaptive_loop_with(&problem.mesh, &problem.data, &problem.output, &options, |rec, _, _| {
        rows.push(Row {
            nel: rec.nel,
            n_edge: rec.n_edge,
            s_minus: rec.bounds.s_minus,
            s_plus: rec.bounds.s_plus,
            s_tilde: rec.bounds.s_tilde,
            half_gap: rec.bounds.half_gap,
            kappa: rec.bounds.kappa,
            s_h: rec.s_h,
            marked: rec.marked,
        });
    });

    let exact = problem.exact_output;
    let violations: Vec<usize> = exact.map_or(Vec::new(), |s| {
        let slack = containment_slack(s);
        (0..rows.len())
            .filter(|&i| !(rows[i].s_minus - slack <= s && s <= rows[i].s_plus + slack))
            .collect()
    });
    let converged = result.as_ref().is_ok_and(|r| r.converged);
    let (status, code) = match &result {
        Err(_) => ("solver_failure", EXIT_SOLVER),
        Ok(_) if !violations.is_empty() => ("containment_violation", EXIT_CONTAINMENT),
        Ok(_) if !converged => ("not_converged", EXIT_NOT_CONVERGED),
        Ok(_) => ("ok", EXIT_OK),
    };
    let refinement = refinement_name(&options.refinement);
    let summary = Summary {
        problem: &problem.name,
        p: config.p,
        tau: config.tau,
        strategy: config.strategy.to_string(),
        refinement,
        target: config.target,
        max_iter: config.max_iter,
        optimize: config.optimize,
        quad_degree: settings.disc.data_quad(),
        iterations: rows.len(),
        converged,
        exact_output: exact,
        containment: match (exact, violations.is_empty()) {
            (None, _) => "unknown",
            (Some(_), true) => "pass",
            (Some(_), false) => "fail",
        },
        violations: violations.clone(),
        final_row: rows.last(),
        status,
        exit_code: code,
        error: result.as_ref().err().map(|e| e.to_string()),
    };

    let text = report(config, &problem, refinement, &rows);
    let mut artifacts = vec![
        ("convergence.csv", csv(&rows, exact, &config.strategy.to_string())),
        ("report.txt", text.clone()),
        ("summary.json", serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    ];
    if config.gnuplot {
        artifacts.push(("convergence.dat", gnuplot(&rows, exact)));
    }
    if let Ok(run) = &result {
        let mut buf = Vec::new();
        if let Err(e) = write_mesh(&run.final_mesh, &mut buf) {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
        artifacts.push(("final_mesh.txt", String::from_utf8(buf).expect("mesh text is UTF-8")));
    }
    for (name, contents) in &artifacts {
        if let Err(e) = write(&config.out, name, contents) {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    }

    print!("{text}");
    match &result {
        Err(e) => eprintln!("error: solver failure: {e}"),
        Ok(_) if !violations.is_empty() => {
            eprintln!("error: the exact output lies outside the bounds on rows {violations:?}")
        }
        Ok(_) if !converged => eprintln!(
            "warning: target gap {:e} not reached in {} iterations",
            config.target, config.max_iter
        ),
        Ok(_) => {}
    }
    code
}
