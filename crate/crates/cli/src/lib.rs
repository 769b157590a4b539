//! Batch front-end for the fractional-BDF toolkit.
//!
//! Subcommands expose the library piecewise (`weights`, `mlf`, `volterra`,
//! `solve`, `decay`, `ratios`) and in bulk (`experiment`, `sweep`). CSV
//! output goes to `--csv PATH` when given, otherwise to stdout; progress
//! and status lines go to stderr so stdout stays machine-readable.
//!
//! Exit codes: 0 success, 1 usage or configuration error (2 is reserved
//! by the argument parser), 3 Newton failure, 4 overflow. `sweep` and
//! `experiment` exit 0 as long as every requested cell yields an
//! observation; a recorded blow-up is an observation, not a failure.

pub mod csvio;
pub mod experiments;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use csvio::{Cell, Table};
use experiments::{ExperimentName, ExperimentSpec};
use fbdf::analysis::{
    contractivity_index, dissipativity_index, stability_ratios, DecayReport, NormKind,
};
use fbdf::mlf::{ml, MlParams};
use fbdf::problems::{
    coupled_problem, lorenz_problem, scalar_cubic_problem, subdiffusion_problem, LorenzParams,
    SubdiffusionGrid,
};
use fbdf::solver::{fabm_solve, fbdf_solve, FOdeProblem, SolveStatus, SolverConfig, Trajectory};
use fbdf::volterra::{asymptotic_limit_estimate, volterra_solve, VolterraSystem};
use fbdf::weights::{bdf2_weights, gl_weights, l1_weights, qia_row, Alpha, SchemeKind};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEWTON_FAILURE: i32 = 3;
pub const EXIT_OVERFLOW: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "fbdf",
    version,
    about = "Fractional backward differentiation formulas for Caputo systems"
)]
pub struct Cli {
    /// Directory for experiment artifacts
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads for concurrent cells (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate scheme weights: columns k,omega,delta (qia: the row for
    /// step n, columns j,mu)
    Weights {
        /// One of gl, l1, bdf2, qia
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        alpha: f64,
        /// Number of steps to cover
        #[arg(long)]
        n: usize,
        /// Write CSV here instead of stdout
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate the two-parameter Mittag-Leffler function E_{α,β}(z)
    Mlf {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Run the scalar convolution recursion and report the limit of n^α·x_n
    Volterra {
        #[arg(long)]
        alpha: f64,
        /// Forcing scale: f_n = c1/(n+1)^α
        #[arg(long, allow_hyphen_values = true)]
        c1: f64,
        /// Kernel scale: F_n = c2/(n+1)^{1+α}
        #[arg(long, allow_hyphen_values = true)]
        c2: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        x0: f64,
    },
    /// Integrate one problem; trajectory CSV has columns t,x1,...,xd
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// One of gl, l1, bdf2, qia, fabm
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        h: f64,
        #[arg(long = "T")]
        t_end: f64,
        /// Comma-separated initial value, or a preset name
        /// (subdiffusion: sine, bump)
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Decay index of a run: contractivity (p, two orbits) or
    /// dissipativity (q, one orbit); CSV columns t,e,index
    Decay {
        /// p (contractivity of a pair) or q (dissipativity of one orbit)
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        problem: ProblemArgs,
        /// One of gl, l1, bdf2, qia, fabm
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        h: f64,
        #[arg(long = "T")]
        t_end: f64,
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Second initial value for kind p
        #[arg(long, allow_hyphen_values = true)]
        y0: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Stability ratios and decay constants for one (scheme, α, h, λ, b)
    Ratios {
        /// One of gl, l1, bdf2, qia
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        h: f64,
        /// One-sided Lipschitz constant (λ < 0 for contractivity)
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Dissipativity slope (b > 0)
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
    },
    /// Run a bundled experiment and write its artifacts under --out
    Experiment {
        /// One of lorenz_fig1, lorenz_fig2, subdiffusion_tables,
        /// cubic_tables, coupled_table, fabm_stability_sweep,
        /// volterra_lemma_demo
        name: String,
        /// Override a numeric parameter, e.g. --set T=100 (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Cross (scheme, α, h) over one problem; one summary row per cell
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated scheme names (gl, l1, bdf2, qia, fabm)
        #[arg(long)]
        schemes: String,
        /// Comma-separated α values
        #[arg(long)]
        alphas: String,
        /// Comma-separated step sizes
        #[arg(long)]
        hs: String,
        #[arg(long = "T")]
        t_end: f64,
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Problem selection shared by solve, decay, and sweep.
#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// One of lorenz, subdiffusion, cubic, coupled
    #[arg(long)]
    pub problem: String,

    /// Lorenz damping parameters (defaults 0.25, 1, 0.25)
    #[arg(long, allow_hyphen_values = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c3: Option<f64>,

    /// Interior grid points per direction (default 31)
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Diffusion coefficient (default 1)
    #[arg(long)]
    pub k: Option<f64>,
}

/// A problem instance plus the defaults the CLI needs around it.
pub struct BuiltProblem {
    pub problem: FOdeProblem,
    pub grid: Option<SubdiffusionGrid>,
    pub default_x0: Vec<f64>,
    pub default_y0: Vec<f64>,
    pub norm: NormKind,
}

pub fn build_problem(args: &ProblemArgs) -> Result<BuiltProblem> {
    match args.problem.as_str() {
        "lorenz" => {
            let params = LorenzParams::new(
                args.c1.unwrap_or(0.25),
                args.c2.unwrap_or(1.0),
                args.c3.unwrap_or(0.25),
            )
            .map_err(|e| anyhow!(e))?;
            Ok(BuiltProblem {
                problem: lorenz_problem(params),
                grid: None,
                default_x0: vec![2.0, 1.0, 2.0],
                default_y0: vec![-2.0, 3.0, -2.0],
                norm: NormKind::Euclidean,
            })
        }
        "subdiffusion" => {
            let (problem, grid) = subdiffusion_problem(
                args.nx.unwrap_or(31),
                args.ny.unwrap_or(31),
                args.k.unwrap_or(1.0),
            )
            .map_err(|e| anyhow!(e))?;
            let (sine, bump) = (grid.initial_sine(), grid.initial_bump());
            Ok(BuiltProblem {
                problem,
                grid: Some(grid),
                default_x0: sine,
                default_y0: bump,
                norm: NormKind::MeanSquare,
            })
        }
        "cubic" => Ok(BuiltProblem {
            problem: scalar_cubic_problem(),
            grid: None,
            default_x0: vec![2.0],
            default_y0: vec![-1.0],
            norm: NormKind::Euclidean,
        }),
        "coupled" => Ok(BuiltProblem {
            problem: coupled_problem(),
            grid: None,
            default_x0: vec![-6.0, 1.0],
            // the flow is odd, so the mirrored orbit gives a clean pair
            default_y0: vec![6.0, -1.0],
            norm: NormKind::Euclidean,
        }),
        other => bail!("unknown problem {other:?}; available: lorenz, subdiffusion, cubic, coupled"),
    }
}

/// Parses `--x0`: a comma-separated vector, or a named mesh preset.
pub fn parse_initial(spec: &str, built: &BuiltProblem) -> Result<Vec<f64>> {
    match (spec, &built.grid) {
        ("sine", Some(grid)) => Ok(grid.initial_sine()),
        ("bump", Some(grid)) => Ok(grid.initial_bump()),
        ("sine" | "bump", None) => bail!("preset {spec:?} only applies to subdiffusion"),
        _ => {
            let values: Result<Vec<f64>, _> =
                spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let values = values.with_context(|| format!("parsing initial value {spec:?}"))?;
            let d = built.problem.dimension();
            if values.len() != d {
                bail!(
                    "initial value has {} components, problem needs {d}",
                    values.len()
                );
            }
            Ok(values)
        }
    }
}

/// Scheme argument for solve-like commands: the four implicit rows plus
/// the explicit predictor-corrector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fbdf(SchemeKind),
    Fabm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fbdf(s) => s.name(),
            Method::Fabm => "fabm",
        }
    }

    pub fn solve(
        self,
        problem: &FOdeProblem,
        alpha: Alpha,
        config: &SolverConfig,
        x0: &[f64],
    ) -> Result<Trajectory> {
        let traj = match self {
            Method::Fbdf(scheme) => fbdf_solve(problem, scheme, alpha, config, x0)?,
            Method::Fabm => fabm_solve(problem, alpha, config, x0)?,
        };
        Ok(traj)
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "fabm" {
            return Ok(Method::Fabm);
        }
        SchemeKind::from_str(s)
            .map(Method::Fbdf)
            .map_err(|_| anyhow!("unknown scheme {s:?}; available: gl, l1, bdf2, qia, fabm"))
    }
}

fn steps_for(h: f64, t_end: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        bail!("step size must be positive, got {h}");
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        bail!("horizon must be positive, got {t_end}");
    }
    Ok(((t_end / h).round() as usize).max(1))
}

/// Writes the table to the path when given, otherwise prints it.
fn emit_table(table: &Table, csv: Option<&PathBuf>) -> Result<()> {
    match csv {
        Some(path) => {
            table.write_to(path)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn status_exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Completed => EXIT_OK,
        SolveStatus::NewtonFailure { .. } => EXIT_NEWTON_FAILURE,
        SolveStatus::Overflow { .. } => EXIT_OVERFLOW,
    }
}

fn status_line(status: SolveStatus) -> String {
    match status {
        SolveStatus::Completed => "status=completed".to_string(),
        SolveStatus::NewtonFailure { step } => format!("status=newton_failure step={step}"),
        SolveStatus::Overflow { step } => format!("status=overflow step={step}"),
    }
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let d = traj.states.first().map_or(0, |s| s.len());
    let mut header: Vec<String> = vec!["t".to_string()];
    for i in 1..=d {
        header.push(format!("x{i}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(&header_refs);
    for (n, state) in traj.states.iter().enumerate() {
        let mut row: Vec<Cell> = Vec::with_capacity(d + 1);
        row.push(traj.times[n].into());
        row.extend(state.iter().map(|&v| Cell::from(v)));
        table.push(row);
    }
    table
}

fn decay_csv(report: &DecayReport) -> Table {
    let mut table = Table::new(&["t", "e", "index"]);
    for n in 0..report.times.len() {
        table.push(vec![
            report.times[n].into(),
            report.e[n].into(),
            report.index[n].unwrap_or(f64::NAN).into(),
        ]);
    }
    table
}

fn configure_pool(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // a second configuration attempt in-process is harmless; the
        // first pool wins
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

/// Executes the parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    configure_pool(cli.jobs);
    match cli.command {
        Command::Weights {
            scheme,
            alpha,
            n,
            csv,
        } => {
            let scheme = SchemeKind::from_str(&scheme).map_err(|e| anyhow!(e))?;
            let alpha = Alpha::new(alpha).map_err(|e| anyhow!(e))?;
            let table = weights_table(scheme, alpha, n)?;
            emit_table(&table, csv.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::Mlf { alpha, beta, z } => {
            let params = MlParams::new(alpha, beta).map_err(|e| anyhow!(e))?;
            let value = ml(params, z).map_err(|e| anyhow!(e))?;
            println!("{value:.16e}");
            Ok(EXIT_OK)
        }
        Command::Volterra {
            alpha,
            c1,
            c2,
            n,
            x0,
        } => {
            if n < 1_000 {
                bail!("need at least 1000 steps for a limit estimate, got {n}");
            }
            let sys = VolterraSystem::power_law(alpha, c1, c2, x0, n);
            let rho = sys.rho_total();
            let xs = volterra_solve(&sys, n);
            let estimate = asymptotic_limit_estimate(&xs, alpha).map_err(|e| anyhow!(e))?;
            println!("limit_estimate={:.16e}", estimate.estimate);
            println!("estimate_spread={:.16e}", estimate.spread);
            println!("rho={rho:.16e}");
            if rho < 1.0 {
                println!("predicted={:.16e}", c1 / (1.0 - rho));
            } else {
                println!("predicted=divergent (rho >= 1)");
            }
            Ok(EXIT_OK)
        }
        Command::Solve {
            problem,
            scheme,
            alpha,
            h,
            t_end,
            x0,
            csv,
        } => {
            let method = Method::from_str(&scheme)?;
            let built = build_problem(&problem)?;
            let x0 = match &x0 {
                Some(s) => parse_initial(s, &built)?,
                None => built.default_x0.clone(),
            };
            let config = SolverConfig::new(h, steps_for(h, t_end)?);
            let alpha = Alpha::new(alpha).map_err(|e| anyhow!(e))?;
            let traj = method.solve(&built.problem, alpha, &config, &x0)?;
            emit_table(&trajectory_table(&traj), csv.as_ref())?;
            eprintln!(
                "{} steps={} newton_iters={}",
                status_line(traj.status),
                traj.states.len() - 1,
                traj.diagnostics.total_newton_iters
            );
            Ok(status_exit_code(traj.status))
        }
        Command::Decay {
            kind,
            problem,
            scheme,
            alpha,
            h,
            t_end,
            x0,
            y0,
            csv,
        } => {
            let method = Method::from_str(&scheme)?;
            let built = build_problem(&problem)?;
            let x0 = match &x0 {
                Some(s) => parse_initial(s, &built)?,
                None => built.default_x0.clone(),
            };
            let config = SolverConfig::new(h, steps_for(h, t_end)?);
            let alpha = Alpha::new(alpha).map_err(|e| anyhow!(e))?;
            let traj_x = method.solve(&built.problem, alpha, &config, &x0)?;
            let (report, statuses) = match kind.as_str() {
                "p" => {
                    let y0 = match &y0 {
                        Some(s) => parse_initial(s, &built)?,
                        None => built.default_y0.clone(),
                    };
                    let traj_y = method.solve(&built.problem, alpha, &config, &y0)?;
                    let statuses = vec![traj_x.status, traj_y.status];
                    (
                        contractivity_index(&traj_x, &traj_y, built.norm, 1.0)?,
                        statuses,
                    )
                }
                "q" => {
                    if y0.is_some() {
                        bail!("--y0 only applies to kind p");
                    }
                    let statuses = vec![traj_x.status];
                    (
                        dissipativity_index(&traj_x, built.norm, 1.0)?,
                        statuses,
                    )
                }
                other => bail!("unknown decay kind {other:?}; use p or q"),
            };
            emit_table(&decay_csv(&report), csv.as_ref())?;
            let final_index = report
                .index
                .last()
                .copied()
                .flatten()
                .map_or("none".to_string(), |v| format!("{v:.6}"));
            eprintln!("final_index={final_index}");
            let worst = statuses
                .into_iter()
                .max_by_key(|s| status_exit_code(*s))
                .expect("at least one run");
            eprintln!("{}", status_line(worst));
            Ok(status_exit_code(worst))
        }
        Command::Ratios {
            scheme,
            alpha,
            h,
            lambda,
            b,
        } => {
            let scheme = SchemeKind::from_str(&scheme).map_err(|e| anyhow!(e))?;
            let alpha = Alpha::new(alpha).map_err(|e| anyhow!(e))?;
            let ratios = stability_ratios(scheme, alpha, h, lambda, b);
            println!("{ratios}");
            Ok(EXIT_OK)
        }
        Command::Experiment { name, overrides } => {
            let name = ExperimentName::from_str(&name)?;
            let mut map = BTreeMap::new();
            for pair in &overrides {
                let (key, value) = pair
                    .split_once('=')
                    .ok_or_else(|| anyhow!("override {pair:?} is not KEY=VALUE"))?;
                let value: f64 = value
                    .parse()
                    .with_context(|| format!("parsing override value in {pair:?}"))?;
                map.insert(key.to_string(), value);
            }
            let spec = ExperimentSpec {
                name,
                overrides: map,
                out_dir: cli.out.clone(),
            };
            let manifest = experiments::run_experiment(&spec)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(EXIT_OK)
        }
        Command::Sweep {
            problem,
            schemes,
            alphas,
            hs,
            t_end,
            x0,
            csv,
        } => {
            let table = run_sweep(&problem, &schemes, &alphas, &hs, t_end, x0.as_deref())?;
            emit_table(&table, csv.as_ref())?;
            Ok(EXIT_OK)
        }
    }
}

fn weights_table(scheme: SchemeKind, alpha: Alpha, n: usize) -> Result<Table> {
    if scheme == SchemeKind::Qia {
        let row = qia_row(alpha, n).map_err(|e| anyhow!(e))?;
        let mut table = Table::new(&["j", "mu"]);
        for (j, &mu) in row.iter().enumerate() {
            table.push(vec![j.into(), mu.into()]);
        }
        return Ok(table);
    }
    let weights = match scheme {
        SchemeKind::GrunwaldLetnikov => gl_weights(alpha, n),
        SchemeKind::L1 => l1_weights(alpha, n),
        SchemeKind::Bdf2 => bdf2_weights(alpha, n),
        SchemeKind::Qia => unreachable!("handled above"),
    }
    .map_err(|e| anyhow!(e))?;
    let mut table = Table::new(&["k", "omega", "delta"]);
    for k in 0..=n {
        table.push(vec![
            k.into(),
            weights.conv()[k].into(),
            weights.starting()[k].into(),
        ]);
    }
    Ok(table)
}

fn parse_list<T: FromStr>(spec: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>> = spec
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<T>()
                .map_err(|e| anyhow!("bad {what} entry {s:?}: {e}"))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        bail!("empty {what} list");
    }
    Ok(items)
}

/// Crosses schemes × alphas × step sizes over one problem. Each cell
/// reports its solve status, the final dissipativity index of the orbit,
/// and wall time; cells run concurrently, rows keep grid order.
fn run_sweep(
    problem_args: &ProblemArgs,
    schemes: &str,
    alphas: &str,
    hs: &str,
    t_end: f64,
    x0: Option<&str>,
) -> Result<Table> {
    use rayon::prelude::*;

    let methods: Vec<Method> = parse_list(schemes, "scheme")?;
    let alphas: Vec<f64> = parse_list(alphas, "alpha")?;
    let hs: Vec<f64> = parse_list(hs, "h")?;
    let built = build_problem(problem_args)?;
    let x0 = match x0 {
        Some(s) => parse_initial(s, &built)?,
        None => built.default_x0.clone(),
    };
    for &a in &alphas {
        Alpha::new(a).map_err(|e| anyhow!(e))?;
    }
    for &h in &hs {
        steps_for(h, t_end)?;
    }

    let mut cells = Vec::new();
    for &method in &methods {
        for &a in &alphas {
            for &h in &hs {
                cells.push((method, a, h));
            }
        }
    }

    let results: Result<Vec<_>> = cells
        .par_iter()
        .map(|&(method, a, h)| {
            let alpha = Alpha::new(a).map_err(|e| anyhow!(e))?;
            let config = SolverConfig::new(h, steps_for(h, t_end)?);
            let start = std::time::Instant::now();
            let traj = method.solve(&built.problem, alpha, &config, &x0)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let final_index = dissipativity_index(&traj, built.norm, 1.0)
                .ok()
                .and_then(|r| r.index.last().copied().flatten());
            Ok((method, a, h, traj.status, final_index, wall_ms))
        })
        .collect();

    let mut table = Table::new(&["scheme", "alpha", "h", "status", "final_index", "wall_ms"]);
    for (method, a, h, status, final_index, wall_ms) in results? {
        table.push(vec![
            method.name().into(),
            a.into(),
            h.into(),
            match status {
                SolveStatus::Completed => "completed".into(),
                SolveStatus::NewtonFailure { step } => {
                    Cell::Text(format!("newton_failure@{step}"))
                }
                SolveStatus::Overflow { step } => Cell::Text(format!("overflow@{step}")),
            },
            final_index.unwrap_or(f64::NAN).into(),
            wall_ms.into(),
        ]);
    }
    Ok(table)
}
