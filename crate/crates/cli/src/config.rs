//! Run configuration: TOML file merged with command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Parser;
use hdg_bounds::adapt::{MarkingStrategy, Refinement};
use hdg_bounds::expr::parse_data;
use hdg_bounds::mesh::read_mesh;
use hdg_bounds::problems::{builtin, Problem, Refiner, BUILTIN_IDS};
use hdg_bounds::{OutputFunctional, ProblemData};
use serde::Deserialize;

pub const DEFAULT_TARGET: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 40;
pub const DEFAULT_OUT: &str = "hdg-bounds-out";

#[derive(Debug, Parser)]
#[command(name = "hdg-bounds", version, about = "Guaranteed output bounds for HDG approximations of the 2D Poisson problem")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in problem id, or `external` with an `[external]` table in the config.
    #[arg(long)]
    pub problem: Option<String>,
    /// Polynomial degree.
    #[arg(long)]
    pub p: Option<usize>,
    /// Stabilization parameter.
    #[arg(long)]
    pub tau: Option<f64>,
    /// `uniform`, `tol:<gap>` or `bulk:<fraction>`.
    #[arg(long)]
    pub strategy: Option<String>,
    /// `red` or `bisect`; defaults to the problem's own refiner.
    #[arg(long)]
    pub refiner: Option<String>,
    /// Stop once `s⁺ − s⁻` falls below this value.
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Locally optimize both reconstructions.
    #[arg(long)]
    pub optimize: bool,
    /// Exactness degree for data integrals.
    #[arg(long)]
    pub quad_degree: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `convergence.dat` for gnuplot.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: Option<String>,
    p: Option<usize>,
    tau: Option<f64>,
    strategy: Option<String>,
    refiner: Option<String>,
    target: Option<f64>,
    max_iter: Option<usize>,
    optimize: Option<bool>,
    quad_degree: Option<usize>,
    out: Option<PathBuf>,
    gnuplot: Option<bool>,
    external: Option<ExternalSpec>,
}

/// A problem given by a mesh file and data expressions in `x`, `y`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub mesh: PathBuf,
    /// Diffusivity per region id; region 0 has `ν = 1` when omitted.
    #[serde(default)]
    pub nu: BTreeMap<String, f64>,
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub g_d: Option<String>,
    #[serde(default)]
    pub g_n: Option<String>,
    #[serde(default)]
    pub f_o: Option<String>,
    #[serde(default)]
    pub g_d_o: Option<String>,
    #[serde(default)]
    pub g_n_o: Option<String>,
    pub exact_output: Option<f64>,
    #[serde(default)]
    pub refiner: Option<String>,
}

#[derive(Debug, Clone)]
pub enum ProblemSpec {
    Builtin(String),
    External(ExternalSpec),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub p: usize,
    pub tau: f64,
    pub strategy: MarkingStrategy,
    /// Explicit refiner; `None` keeps the problem's own choice.
    pub refiner: Option<Refiner>,
    pub target: f64,
    pub max_iter: usize,
    pub optimize: bool,
    pub quad_degree: Option<usize>,
    pub out: PathBuf,
    pub gnuplot: bool,
}

pub fn parse_refiner(s: &str) -> Result<Refiner, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "red" => Ok(Refiner::Red),
        "bisect" | "bisection" => Ok(Refiner::Bisect),
        other => Err(format!("unknown refiner {other:?}; expected red or bisect")),
    }
}

fn resolve_path(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

impl RunConfig {
    /// Merges the optional config file with the flags and validates the result.
    pub fn from_cli(cli: Cli) -> Result<Self, String> {
        let (file, base) = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                let file: FileConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                (file, path.parent().map(Path::to_path_buf))
            }
            None => (FileConfig::default(), None),
        };
        let problem_id = cli.problem.or(file.problem);
        let problem = match (problem_id.as_deref(), file.external) {
            (None | Some("external"), Some(mut ext)) => {
                ext.mesh = resolve_path(base.as_deref(), ext.mesh);
                ProblemSpec::External(ext)
            }
            (Some("external"), None) => return Err("problem `external` needs an [external] table in the config".into()),
            (Some(id), _) if BUILTIN_IDS.contains(&id) => ProblemSpec::Builtin(id.to_string()),
            (Some(id), _) => {
                return Err(format!("unknown problem {id:?}; available: {}, external", BUILTIN_IDS.join(", ")))
            }
            (None, None) => return Err("no problem given; use --problem or a config file".into()),
        };
        let p = cli.p.or(file.p).ok_or("the polynomial degree p is required")?;
        let tau = cli.tau.or(file.tau).unwrap_or(1.0);
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(format!("tau must be > 0, got {tau}"));
        }
        let strategy: MarkingStrategy = cli
            .strategy
            .or(file.strategy)
            .as_deref()
            .unwrap_or("uniform")
            .parse()
            .map_err(|e: hdg_bounds::Error| e.to_string())?;
        let refiner = match cli.refiner.or(file.refiner) {
            Some(r) => Some(parse_refiner(&r)?),
            None => None,
        };
        let target = cli.target.or(file.target).unwrap_or(DEFAULT_TARGET);
        if !(target > 0.0 && target.is_finite()) {
            return Err(format!("target must be > 0, got {target}"));
        }
        let max_iter = cli.max_iter.or(file.max_iter).unwrap_or(DEFAULT_MAX_ITER);
        if max_iter == 0 {
            return Err("max-iter must be at least 1".into());
        }
        Ok(Self {
            problem,
            p,
            tau,
            strategy,
            refiner,
            target,
            max_iter,
            optimize: cli.optimize || file.optimize.unwrap_or(false),
            quad_degree: cli.quad_degree.or(file.quad_degree),
            out: cli.out.or(file.out.map(|o| resolve_path(base.as_deref(), o))).unwrap_or(DEFAULT_OUT.into()),
            gnuplot: cli.gnuplot || file.gnuplot.unwrap_or(false),
        })
    }

    /// Problem instance and the refinement used to produce the next mesh.
    pub fn build_problem(&self) -> Result<(Problem, Refinement), String> {
        let problem = match &self.problem {
            ProblemSpec::Builtin(id) => builtin(id).map_err(|e| e.to_string())?,
            ProblemSpec::External(ext) => external_problem(ext)?,
        };
        let refinement = match self.refiner {
            Some(r) => Refinement::Local(r),
            None => problem.refinement_for(&self.strategy),
        };
        Ok((problem, refinement))
    }
}

fn external_problem(ext: &ExternalSpec) -> Result<Problem, String> {
    let mut nu = BTreeMap::new();
    for (k, v) in &ext.nu {
        let id: u32 = k.parse().map_err(|_| format!("region id {k:?} in [external.nu] is not an integer"))?;
        nu.insert(id, *v);
    }
    if nu.is_empty() {
        nu.insert(0, 1.0);
    }
    let file = fs::File::open(&ext.mesh).map_err(|e| format!("cannot open mesh {}: {e}", ext.mesh.display()))?;
    let mesh = read_mesh(BufReader::new(file), nu).map_err(|e| format!("{}: {e}", ext.mesh.display()))?;
    let data = |name: &str, s: &Option<String>| -> Result<hdg_bounds::DataFn, String> {
        parse_data(s.as_deref().unwrap_or("0")).map_err(|e| format!("{name}: {e}"))
    };
    let refiner = match &ext.refiner {
        Some(r) => parse_refiner(r)?,
        None => Refiner::Red,
    };
    Ok(Problem {
        name: ext.mesh.file_stem().map_or("external".into(), |s| s.to_string_lossy().into_owned()),
        mesh,
        data: ProblemData {
            f: data("f", &ext.f)?,
            g_d: data("g_d", &ext.g_d)?,
            g_n: data("g_n", &ext.g_n)?,
        },
        output: OutputFunctional {
            f_o: data("f_o", &ext.f_o)?,
            g_d_o: data("g_d_o", &ext.g_d_o)?,
            g_n_o: data("g_n_o", &ext.g_n_o)?,
        },
        exact_output: ext.exact_output,
        exact_solution: None,
        refiner,
        uniform_levels: None,
    })
}
