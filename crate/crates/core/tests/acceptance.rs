//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

mod common;

use std::sync::OnceLock;

use rayon::prelude::*;

use common::{exact_output, fitted_order, manufactured, neumann_square, report, AuditMax, Poly};
use hdg_bounds::adapt::{adaptive_loop_with, convergence_order, AdaptiveOptions, MarkingStrategy};
use hdg_bounds::bounds::{compute_eta, representation_bounds};
use hdg_bounds::mesh::{crisscross, refine_bisection};
use hdg_bounds::pipeline::{evaluate, Evaluation, Settings};
use hdg_bounds::problems::{builtin, Problem};
use hdg_bounds::{Mesh, OutputFunctional, ProblemData};

fn settings(p: usize, tau: f64, optimize: bool) -> Settings {
    let mut s = Settings::new(p, tau).unwrap();
    s.optimize = optimize;
    s
}

/// Evaluates and audits the reconstructions, failing criterion 6 on violation.
fn evaluate_audited(mesh: &Mesh, data: &ProblemData, out: &OutputFunctional, s: &Settings) -> (Evaluation, AuditMax) {
    let eval = evaluate(mesh, data, out, s).expect("evaluation");
    let mut audit = AuditMax::default();
    audit.add(mesh, data, out, &eval);
    (eval, audit)
}

struct Run {
    /// `(nel, s_minus, s_plus, half_gap)` per pass.
    rows: Vec<(usize, f64, f64, f64)>,
    converged: bool,
    audit: AuditMax,
}

fn run(problem: &Problem, opts: &AdaptiveOptions) -> Run {
    let mut audit = AuditMax::default();
    let result = adaptive_loop_with(&problem.mesh, &problem.data, &problem.output, opts, |_, mesh, eval| {
        audit.add(mesh, &problem.data, &problem.output, eval);
    })
    .expect("adaptive run");
    Run {
        rows: result
            .records
            .iter()
            .map(|r| (r.nel, r.bounds.s_minus, r.bounds.s_plus, r.bounds.half_gap))
            .collect(),
        converged: result.converged,
        audit,
    }
}

fn uniform_options(problem: &Problem, s: Settings, levels: usize) -> AdaptiveOptions {
    let strategy = MarkingStrategy::Uniform;
    AdaptiveOptions {
        settings: s,
        strategy,
        refinement: problem.refinement_for(&strategy),
        target: f64::MIN_POSITIVE,
        max_iterations: levels,
    }
}

/// `(nel, s_tilde, half_gap)` for example1_s1 on `n × n` criss-cross meshes.
type Sweep = Vec<(usize, f64, f64)>;

fn criss_cross_sweep(p: usize) -> &'static (Sweep, AuditMax) {
    static SWEEPS: [OnceLock<(Sweep, AuditMax)>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    SWEEPS[p].get_or_init(|| {
        let problem = builtin("example1_s1").unwrap();
        let ns: &[usize] = match p {
            1 => &[2, 4, 8, 16, 32],
            _ => &[2, 4, 8, 16],
        };
        let results: Vec<_> = ns
            .par_iter()
            .map(|&n| {
                let mesh = crisscross(n);
                let (e, a) = evaluate_audited(&mesh, &problem.data, &problem.output, &settings(p, 1.0, true));
                ((e.nel, e.bounds.s_tilde, e.bounds.half_gap), a)
            })
            .collect();
        let mut audit = AuditMax::default();
        for (_, a) in &results {
            audit.merge(a);
        }
        (results.into_iter().map(|(r, _)| r).collect(), audit)
    })
}

fn check_audit(criterion: u32, audit: &AuditMax) {
    if !audit.ok() {
        report(6, false, &format!("reconstruction audit during criterion {criterion}"), &audit.summary());
        panic!("reconstruction audit failed: {}", audit.summary());
    }
}

#[test]
fn criterion_1_containment() {
    let start = std::time::Instant::now();
    let ids = ["example1_s1", "example1_s2", "example2_s1"];
    let strategies = [
        MarkingStrategy::Uniform,
        MarkingStrategy::ErrorDistribution(1e-6),
        MarkingStrategy::Bulk(0.5),
    ];
    let mut cases = Vec::new();
    for id in ids {
        for p in 1..=3 {
            for tau in [0.1, 1.0, 10.0] {
                for strategy in strategies {
                    cases.push((id, p, tau, strategy));
                }
            }
        }
    }
    let outcomes: Vec<(String, usize, usize, AuditMax)> = cases
        .par_iter()
        .map(|&(id, p, tau, strategy)| {
            let problem = builtin(id).unwrap();
            let exact = problem.exact_output.unwrap();
            let opts = match strategy {
                MarkingStrategy::Uniform => uniform_options(&problem, settings(p, tau, false), 3),
                _ => AdaptiveOptions {
                    max_iterations: 5,
                    refinement: problem.refinement_for(&strategy),
                    ..AdaptiveOptions::new(settings(p, tau, false), strategy, problem.refiner, 1e-10)
                },
            };
            let r = run(&problem, &opts);
            let violations = r.rows.iter().filter(|(_, lo, hi, _)| !(*lo <= exact && exact <= *hi)).count();
            (format!("{id} p={p} tau={tau} {strategy}"), r.rows.len(), violations, r.audit)
        })
        .collect();
    let mut audit = AuditMax::default();
    let mut meshes = 0;
    let mut bad = Vec::new();
    for (name, n, v, a) in &outcomes {
        audit.merge(a);
        meshes += n;
        if *v > 0 {
            bad.push(format!("{name}: {v}"));
        }
    }
    check_audit(1, &audit);
    let secs = start.elapsed().as_secs_f64();
    let ok = bad.is_empty() && secs < 300.0;
    report(
        1,
        ok,
        "containment",
        &format!("{} runs, {meshes} meshes, {} violations, {secs:.1}s {}", outcomes.len(), bad.len(), bad.join("; ")),
    );
    assert!(ok);
}

#[test]
fn criterion_2_criss_cross_reference() {
    let reference: [(usize, &[(usize, f64, f64)], &[f64]); 2] = [
        (
            1,
            &[
                (16, 0.406021554922, 5.47e-3),
                (64, 0.405317075580, 3.19e-4),
                (256, 0.405286596697, 1.97e-5),
                (1024, 0.405284843586, 1.27e-6),
                (4096, 0.405284741107, 8.28e-8),
            ],
            &[4.10, 4.02, 3.96, 3.93],
        ),
        (
            2,
            &[
                (16, 0.405275669432, 1.26e-4),
                (64, 0.405284783569, 3.02e-6),
                (256, 0.405284735937, 8.33e-8),
                (1024, 0.405284734592, 2.46e-9),
            ],
            &[5.38, 5.18, 5.08],
        ),
    ];
    let mut failures = Vec::new();
    let mut worst_s = 0.0_f64;
    let mut worst_gap = 0.0_f64;
    let mut worst_order = 0.0_f64;
    for (p, rows, orders) in reference {
        let (sweep, audit) = criss_cross_sweep(p);
        check_audit(2, audit);
        for (&(nel, s_ref, hg_ref), &(n, s, hg)) in rows.iter().zip(sweep) {
            assert_eq!(nel, n);
            let ds = (s - s_ref).abs();
            let dg = (hg - hg_ref).abs() / hg_ref;
            worst_s = worst_s.max(ds);
            worst_gap = worst_gap.max(dg);
            if ds > 1e-6 || dg > 0.1 {
                failures.push(format!("p={p} nel={nel}: s~ {s:.12} vs {s_ref:.12}, half-gap {hg:.3e} vs {hg_ref:.2e}"));
            }
        }
        for (i, &o_ref) in orders.iter().enumerate() {
            let o = convergence_order(sweep[i + 1].2, sweep[i + 1].0, sweep[i].2, sweep[i].0).unwrap();
            worst_order = worst_order.max((o - o_ref).abs());
            if (o - o_ref).abs() > 0.25 {
                failures.push(format!("p={p} order {o:.2} vs {o_ref:.2}"));
            }
        }
    }
    let ok = failures.is_empty();
    report(
        2,
        ok,
        "criss-cross reference table",
        &format!(
            "max |ds~| {worst_s:.1e}, max half-gap rel {worst_gap:.1e}, max order dev {worst_order:.2} {}",
            failures.join("; ")
        ),
    );
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_3_gap_order() {
    let mut details = Vec::new();
    let mut ok = true;
    for p in 1..=3 {
        let (sweep, audit) = criss_cross_sweep(p);
        check_audit(3, audit);
        let last: Vec<(usize, f64)> = sweep[sweep.len() - 3..].iter().map(|r| (r.0, r.2)).collect();
        let order = fitted_order(&last);
        let target = (p + 3) as f64;
        ok &= (order - target).abs() <= 0.3;
        details.push(format!("p={p} {order:.2} (target {target})"));
    }
    report(3, ok, "superconvergent gap order", &details.join(", "));
    assert!(ok);
}

#[test]
fn criterion_4_example2_energy() {
    let problem = builtin("example2_s1").unwrap();
    let mut failures = Vec::new();
    let mut details = Vec::new();

    let (e, audit) = evaluate_audited(&problem.mesh, &problem.data, &problem.output, &settings(3, 1.0, true));
    check_audit(4, &audit);
    let (lo, hi) = (e.bounds.s_minus, e.bounds.s_plus);
    details.push(format!("initial p=3 [{lo:.7}, {hi:.7}]"));
    if (lo - 0.2120143).abs() > 1e-5 || (hi - 0.2153474).abs() > 1e-5 {
        failures.push(format!(
            "initial bounds off by ({:.1e}, {:.1e})",
            (lo - 0.2120143).abs(),
            (hi - 0.2153474).abs()
        ));
    }

    let r = run(&problem, &uniform_options(&problem, settings(1, 1.0, false), 9));
    check_audit(4, &r.audit);
    let last: Vec<(usize, f64)> = r.rows[r.rows.len() - 3..].iter().map(|r| (r.0, r.3)).collect();
    let slope = -fitted_order(&last) / 2.0;
    details.push(format!("uniform slope {slope:.3}"));
    if (slope + 2.0 / 3.0).abs() > 0.15 {
        failures.push(format!("uniform slope {slope:.3}"));
    }

    let reference_nel = [984, 152, 112];
    let bulk: Vec<(usize, Run)> = (1..=3)
        .into_par_iter()
        .map(|p| {
            let opts = AdaptiveOptions::new(settings(p, 1.0, true), MarkingStrategy::Bulk(0.5), problem.refiner, 1e-5);
            (p, run(&problem, &opts))
        })
        .collect();
    for (p, r) in &bulk {
        check_audit(4, &r.audit);
        let (nel, _, _, hg) = *r.rows.last().unwrap();
        let limit = reference_nel[p - 1] * 3 / 2;
        details.push(format!("bulk p={p} nel {nel} half-gap {hg:.2e}"));
        if !r.converged || hg >= 5e-6 || nel > limit {
            failures.push(format!("bulk p={p}: nel {nel} (limit {limit}), half-gap {hg:.2e}"));
        }
    }
    let ok = failures.is_empty();
    report(4, ok, "example 2 energy output", &format!("{}; {}", details.join(", "), failures.join("; ")));
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_5_example2_s2() {
    let problem = builtin("example2_s2").unwrap();
    let s = settings(2, 1.0, false);
    let opts = AdaptiveOptions::new(s, MarkingStrategy::Bulk(0.5), problem.refiner, 1e-4);
    let mut audit = AuditMax::default();
    // Share of `Ση²` carried by the data-oscillation terms, per pass.
    let mut osc = Vec::new();
    let result = adaptive_loop_with(&problem.mesh, &problem.data, &problem.output, &opts, |_, mesh, eval| {
        audit.add(mesh, &problem.data, &problem.output, eval);
        let eta = compute_eta(
            mesh,
            2,
            &eval.primal_rec,
            &eval.adjoint_rec,
            &problem.data,
            &problem.output,
            s.disc.data_quad(),
            s.mode,
            eval.bounds.kappa,
        )
        .unwrap();
        let terms = || eta.minus.iter().chain(&eta.plus);
        let total: f64 = terms().map(|t| t.total().powi(2)).sum();
        let flux: f64 = terms().map(|t| t.flux.powi(2)).sum();
        osc.push((total - flux) / total);
    })
    .unwrap();
    check_audit(5, &audit);
    let gaps: Vec<f64> = result.records.iter().map(|r| r.bounds.half_gap).collect();
    // Pre-asymptotic while oscillation dominates the estimators.
    let start = osc.iter().position(|o| *o < 0.5).unwrap_or(gaps.len());
    let monotone = gaps[start..].windows(2).all(|w| w[1] <= w[0]);
    let mesh = &result.final_mesh;
    let near = (0..mesh.num_elements())
        .filter(|&k| {
            let c = mesh.geometry(k).centroid();
            let d = |a: [f64; 2]| ((c[0] - a[0]).powi(2) + (c[1] - a[1]).powi(2)).sqrt();
            d([0.0, 0.0]) <= 0.25 || d([0.25, 0.5]) <= 0.25
        })
        .count();
    let fraction = near as f64 / mesh.num_elements() as f64;
    let ok = result.converged && start + 1 < gaps.len() && monotone && fraction >= 0.3;
    report(
        5,
        ok,
        "example 2 s2 behaviour",
        &format!(
            "{} passes, oscillation-dominated until pass {start} (nel {}), monotone after: {monotone}, final nel {}, half-gap {:.2e}, near features {:.0}%",
            gaps.len(),
            result.records.get(start).map_or(0, |r| r.nel),
            mesh.num_elements(),
            gaps.last().unwrap(),
            100.0 * fraction
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_reconstruction_audit() {
    let mut cases = Vec::new();
    for id in ["example1_s1", "example1_s2", "example2_s1", "example2_s2"] {
        for p in 0..=3 {
            for optimize in [false, true] {
                cases.push((id, p, optimize));
            }
        }
    }
    let audits: Vec<AuditMax> = cases
        .par_iter()
        .map(|&(id, p, optimize)| {
            let problem = builtin(id).unwrap();
            let opts = AdaptiveOptions {
                max_iterations: 4,
                ..AdaptiveOptions::new(settings(p, 1.0, optimize), MarkingStrategy::Bulk(0.3), problem.refiner, 1e-12)
            };
            run(&problem, &opts).audit
        })
        .collect();
    let mut audit = AuditMax::default();
    for a in &audits {
        audit.merge(a);
    }
    for p in 1..=3 {
        audit.merge(&criss_cross_sweep(p).1);
    }
    let ok = audit.ok();
    report(6, ok, "reconstruction properties", &audit.summary());
    assert!(ok);
}

#[test]
fn criterion_7_polynomial_exactness() {
    let nu = 2.5;
    let mut worst = 0.0_f64;
    let mut audit = AuditMax::default();
    for p in 1..=3 {
        let u = Poly::sample(p, 0.3);
        let xi = Poly::sample(p, 2.1);
        let data = manufactured(&u, nu);
        // The adjoint data of this functional reproduce `ξ` exactly.
        let adj = manufactured(&xi, nu);
        let out = OutputFunctional {
            f_o: adj.f,
            g_d_o: adj.g_d,
            g_n_o: adj.g_n.negated(),
        };
        for n in [1, 2, 4] {
            let mesh = neumann_square(n, nu);
            let (e, a) = evaluate_audited(&mesh, &data, &out, &settings(p, 1.0, false));
            audit.merge(&a);
            let s = exact_output(&mesh, &u, &out, nu, 2 * p + 2);
            let scale = 1.0 + s.abs();
            worst = worst.max((s - e.bounds.s_tilde).abs() / scale).max(e.bounds.half_gap / scale);
        }
    }
    check_audit(7, &audit);
    let ok = worst <= 1e-9;
    report(7, ok, "polynomial exactness", &format!("max scaled error {worst:.1e} over p = 1..3, 3 meshes each"));
    assert!(ok);
}

#[test]
fn criterion_8_representation_cross_check() {
    let problem = builtin("example2_s1").unwrap();
    let mut worst = 0.0_f64;
    let mut audit = AuditMax::default();
    for p in 1..=3 {
        let s = settings(p, 1.0, false);
        let quad = s.disc.data_quad();
        let mut mesh = problem.mesh.clone();
        for _ in 0..4 {
            let (e, a) = evaluate_audited(&mesh, &problem.data, &problem.output, &s);
            audit.merge(&a);
            let t = representation_bounds(&mesh, p, &e.primal_rec, &e.adjoint_rec, &problem.data, &problem.output, quad)
                .unwrap();
            let scale = e.bounds.s_tilde.abs().max(e.bounds.half_gap);
            for (x, y) in [
                (t.s_minus, e.bounds.s_minus),
                (t.s_plus, e.bounds.s_plus),
                (t.s_tilde, e.bounds.s_tilde),
            ] {
                worst = worst.max((x - y).abs() / scale);
            }
            worst = worst.max((t.half_gap - e.bounds.half_gap).abs() / e.bounds.half_gap);
            let all: Vec<usize> = (0..mesh.num_elements()).collect();
            mesh = refine_bisection(&mesh, &all).unwrap();
        }
    }
    check_audit(8, &audit);
    let ok = worst <= 1e-12;
    report(8, ok, "representation cross-check", &format!("max relative difference {worst:.1e}"));
    assert!(ok);
}

#[test]
fn criterion_9_homogeneity() {
    let problem = builtin("example1_s1").unwrap();
    let mesh = crisscross(4);
    assert_eq!(mesh.num_elements(), 64);
    let s = settings(2, 1.0, false);
    let (a, audit_a) = evaluate_audited(&mesh, &problem.data, &problem.output, &s);
    let scaled = problem.output.scaled(7.0);
    let (b, audit_b) = evaluate_audited(&mesh, &problem.data, &scaled, &s);
    check_audit(9, &audit_a);
    check_audit(9, &audit_b);
    let worst = [
        (a.bounds.s_minus, b.bounds.s_minus),
        (a.bounds.s_plus, b.bounds.s_plus),
        (a.bounds.s_tilde, b.bounds.s_tilde),
    ]
    .iter()
    .map(|(x, y)| (7.0 * x - y).abs() / y.abs())
    .fold(0.0, f64::max);
    let ok = worst <= 1e-12;
    report(9, ok, "homogeneity", &format!("max relative deviation {worst:.1e}"));
    assert!(ok);
}
