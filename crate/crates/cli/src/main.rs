//! `emdflux`: compute Earth Mover's Distances between lattice densities.
//!
//! Three modes, selected by flags:
//!
//! * solve (`--example NAME` or `--rho0 FILE --rho1 FILE`): run the
//!   primal-dual solver once and print a `key=value` summary;
//! * `--table {t1..t5}`: reproduce one of the benchmark sweeps;
//! * `--oracle-check`: compare the solver against the exact assignment
//!   oracle on random small instances.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 numerical failure,
//! 3 non-convergence within the iteration budget.

mod io;
mod oracle_check;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use emdflux::examples::{generate, ExampleName, ExampleSpec};
use emdflux::lattice::LatticeGrid;
use emdflux::{solve, Config, Density, Error, Metric, Report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;

/// Failures that abort a run, tagged with the exit code class.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::Diverged { .. } => CliError::Numerical(err.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MetricArg {
    L1,
    L2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::L1 => Metric::L1,
            MetricArg::L2 => Metric::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
}

#[derive(Parser, Debug)]
#[command(
    name = "emdflux",
    version,
    about = "Earth Mover's Distance between lattice densities via primal-dual flux minimization"
)]
struct Args {
    /// Built-in density pair: dirac_pair, dirac_split2, dirac_split4,
    /// dirac_to_ring, cross_to_ring
    #[arg(long, value_name = "NAME")]
    example: Option<String>,

    /// Source density file (line 1: `nx ny xmin xmax ymin ymax`, then nx*ny
    /// values row-major); requires --rho1
    #[arg(long, value_name = "PATH")]
    rho0: Option<PathBuf>,

    /// Target density file; requires --rho0
    #[arg(long, value_name = "PATH")]
    rho1: Option<PathBuf>,

    /// Ground metric
    #[arg(long, value_enum, default_value_t = MetricArg::L2)]
    metric: MetricArg,

    /// Quadratic regularization weight for the l1 metric [default: 0.01]
    #[arg(long, value_name = "R")]
    epsilon: Option<f64>,

    /// Primal step size [default: spacing/4]
    #[arg(long, value_name = "R")]
    mu: Option<f64>,

    /// Dual step size [default: spacing/4]
    #[arg(long, value_name = "R")]
    tau: Option<f64>,

    /// Extrapolation weight in [0, 1]
    #[arg(long, value_name = "R", default_value_t = 1.0)]
    theta: f64,

    /// Stopping threshold on the mean divergence residual
    #[arg(long, value_name = "R", default_value_t = 1e-5)]
    tol: f64,

    /// Iteration budget
    #[arg(long, value_name = "INT", default_value_t = 100_000)]
    max_iters: usize,

    /// Grid size n for an n-by-n lattice over [-2,2]^2 [default: 40]
    #[arg(long, value_name = "INT")]
    grid: Option<usize>,

    /// Write the flux field as `ix iy axis value` lines
    #[arg(long, value_name = "PATH")]
    out_flux: Option<PathBuf>,

    /// Write the potential as a row-major grid
    #[arg(long, value_name = "PATH")]
    out_potential: Option<PathBuf>,

    /// Write the residual history as `iteration residual` lines
    #[arg(long, value_name = "PATH")]
    out_residuals: Option<PathBuf>,

    /// Reproduce a benchmark table (writes table_<id>.txt)
    #[arg(long, value_enum, value_name = "ID")]
    table: Option<TableId>,

    /// Check the solver against the exact oracle on random instances
    #[arg(long, default_value_t = false)]
    oracle_check: bool,

    /// Seed for all randomness
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,

    /// Worker threads for the solver update maps (output is identical for
    /// any value)
    #[arg(long, value_name = "INT", default_value_t = 1)]
    threads: usize,

    /// Reject step sizes violating tau*mu*||K||^2 < 1 instead of warning
    #[arg(long, default_value_t = false)]
    strict_steps: bool,

    /// Denominator of the random rational masses in --oracle-check (<= 64)
    #[arg(long, value_name = "INT", default_value_t = 32)]
    denominator: u32,

    /// Number of random instances in --oracle-check
    #[arg(long, value_name = "INT", default_value_t = 10)]
    instances: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(err) if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{err}");
            return ExitCode::from(EXIT_OK);
        }
        Err(err) => {
            eprint!("{err}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn run(args: &Args) -> Result<u8, CliError> {
    let solve_mode = args.example.is_some() || args.rho0.is_some() || args.rho1.is_some();
    let modes = usize::from(solve_mode)
        + usize::from(args.table.is_some())
        + usize::from(args.oracle_check);
    if modes == 0 {
        return Err(CliError::Usage(
            "nothing to do: pass --example/--rho0+--rho1, --table, or --oracle-check".into(),
        ));
    }
    if modes > 1 {
        return Err(CliError::Usage(
            "--example/--rho0, --table, and --oracle-check are mutually exclusive".into(),
        ));
    }

    if let Some(table) = args.table {
        return tables::run_table(table, args.threads);
    }
    if args.oracle_check {
        return oracle_check::run_oracle_check(
            args.grid.unwrap_or(4),
            args.seed,
            args.denominator,
            args.instances,
            args.threads,
        );
    }
    run_solve(args)
}

/// Resolve the density pair for solve mode, plus a label for the summary.
fn load_pair(args: &Args) -> Result<(Density, Density, Option<ExampleName>), CliError> {
    match (&args.example, &args.rho0, &args.rho1) {
        (Some(name), None, None) => {
            let name: ExampleName = name
                .parse()
                .map_err(|e: Error| CliError::Usage(e.to_string()))?;
            let n = args.grid.unwrap_or(40);
            if n == 0 {
                return Err(CliError::Usage("--grid must be positive".into()));
            }
            let grid = Arc::new(
                LatticeGrid::square(n, -2.0, 2.0).map_err(|e| CliError::Usage(e.to_string()))?,
            );
            let spec = ExampleSpec::new(name, grid).map_err(|e| CliError::Usage(e.to_string()))?;
            let (p0, p1) = generate(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok((p0, p1, Some(name)))
        }
        (None, Some(path0), Some(path1)) => {
            if args.grid.is_some() {
                return Err(CliError::Usage(
                    "--grid conflicts with --rho0/--rho1 (the files fix the grid)".into(),
                ));
            }
            let p0 = io::load_density(path0)?;
            let p1 = io::load_density(path1)?;
            if p0.grid() != p1.grid() {
                return Err(CliError::Usage(format!(
                    "density files disagree on the grid: {} vs {}",
                    path0.display(),
                    path1.display()
                )));
            }
            Ok((p0, p1, None))
        }
        (None, _, _) => Err(CliError::Usage("--rho0 and --rho1 must be given together".into())),
        (Some(_), _, _) => Err(CliError::Usage(
            "--example conflicts with --rho0/--rho1".into(),
        )),
    }
}

fn build_config(args: &Args, spacing: f64) -> Config {
    let mut config = Config::new(args.metric.into());
    config.mu = args.mu.unwrap_or(spacing / 4.0);
    config.tau = args.tau.unwrap_or(spacing / 4.0);
    config.theta = args.theta;
    if let Some(eps) = args.epsilon {
        config.epsilon = eps;
    }
    config.tol = args.tol;
    config.max_iters = args.max_iters;
    config.strict_steps = args.strict_steps;
    config.threads = args.threads;
    config
}

fn run_solve(args: &Args) -> Result<u8, CliError> {
    let (p0, p1, example) = load_pair(args)?;
    let grid = p0.grid().clone();
    let config = build_config(args, grid.spacing());

    let start = Instant::now();
    let report = solve(&p0, &p1, &config, None, None)?;
    let wall = start.elapsed().as_secs_f64();

    print_summary(&config, &grid, example, &report, wall);
    write_outputs(args, &grid, &report)?;

    Ok(if report.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}

/// Machine-parseable summary: one `key=value` per line, fixed key order.
fn print_summary(
    config: &Config,
    grid: &LatticeGrid<f64>,
    example: Option<ExampleName>,
    report: &Report,
    wall: f64,
) {
    if let Some(name) = example {
        println!("example={name}");
    }
    println!("metric={}", config.metric);
    println!("nx={}", grid.shape()[1]);
    println!("ny={}", grid.shape()[0]);
    println!("spacing={}", io::fmt_f(grid.spacing()));
    println!("mu={}", io::fmt_f(config.mu));
    println!("tau={}", io::fmt_f(config.tau));
    println!("theta={}", io::fmt_f(config.theta));
    println!("epsilon={}", io::fmt_f(config.epsilon));
    println!("tol={}", io::fmt_f(config.tol));
    println!("max_iters={}", config.max_iters);
    println!("distance={}", io::fmt_f(report.distance));
    println!("regularized_distance={}", io::fmt_f(report.regularized_distance));
    println!("iterations={}", report.iterations);
    println!("converged={}", report.converged);
    let final_residual = report.residual_history.last().map_or(f64::NAN, |&(_, r)| r);
    println!("final_residual={}", io::fmt_f(final_residual));
    println!("wall_time_s={}", io::fmt_f(wall));
}

fn write_outputs(args: &Args, grid: &LatticeGrid<f64>, report: &Report) -> Result<(), CliError> {
    if let Some(path) = &args.out_residuals {
        io::write_residuals(path, &report.residual_history)?;
    }
    if let Some(path) = &args.out_flux {
        io::write_flux(path, grid, &report.flux)?;
    }
    if let Some(path) = &args.out_potential {
        io::write_potential(path, grid, &report.potential)?;
    }
    Ok(())
}
