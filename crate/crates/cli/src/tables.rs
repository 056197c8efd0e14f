//! Benchmark table sweeps.
//!
//! Each table id reruns the corresponding sweep and emits a text table to
//! stdout and to `table_<id>.txt` in the working directory. Solver timing is
//! wall-clock around the iteration loop only; setup and I/O are excluded. A
//! cell whose solve fails or stalls is recorded as FAILED and the sweep
//! continues.

use std::sync::Arc;
use std::time::Instant;

use emdflux::examples::{generate, ExampleName, ExampleSpec};
use emdflux::lattice::LatticeGrid;
use emdflux::{solve, Config, Metric, Report};

use crate::io::fmt_f;
use crate::{CliError, TableId, EXIT_OK};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Analytic references for the Dirac examples: Manhattan and Euclidean
/// distances of the 0.4-by-0.4 displacement.
const L1_REF: f64 = 0.8;
const L2_REF: f64 = 0.4 * SQRT_2;

fn grid_sizes() -> [usize; 4] {
    [10, 20, 40, 80]
}

fn pair(name: ExampleName, n: usize) -> Result<(emdflux::Density, emdflux::Density), CliError> {
    let grid = Arc::new(LatticeGrid::square(n, -2.0, 2.0).map_err(CliError::from)?);
    let spec = ExampleSpec::new(name, grid).map_err(CliError::from)?;
    generate(&spec).map_err(CliError::from)
}

fn config(metric: Metric, spacing: f64, tol: f64, epsilon: f64, threads: usize) -> Config {
    let mut config = Config::new(metric);
    config.mu = spacing / 4.0;
    config.tau = spacing / 4.0;
    config.tol = tol;
    config.epsilon = epsilon;
    config.max_iters = 200_000;
    config.threads = threads;
    config
}

/// One solved cell: wall time of the iteration loop plus the report.
fn run_cell(
    name: ExampleName,
    n: usize,
    metric: Metric,
    tol: f64,
    epsilon: f64,
    threads: usize,
) -> Result<(f64, Report), CliError> {
    let (p0, p1) = pair(name, n)?;
    let config = config(metric, p0.grid().spacing(), tol, epsilon, threads);
    let start = Instant::now();
    let report = solve(&p0, &p1, &config, None, None)?;
    let wall = start.elapsed().as_secs_f64();
    if !report.converged {
        return Err(CliError::Numerical(format!(
            "cell {name} n={n} {metric} did not converge within {} iterations",
            config.max_iters
        )));
    }
    Ok((wall, report))
}

const FIGURE_EXAMPLES: [ExampleName; 3] = [
    ExampleName::DiracPair,
    ExampleName::DiracSplit2,
    ExampleName::DiracSplit4,
];

fn build_table(id: TableId, threads: usize) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    match id {
        TableId::T1 => {
            line("# euclidean metric, stopping mean-residual <= 1e-5".into());
            line("# example n time_s iterations rel_error".into());
            for name in FIGURE_EXAMPLES {
                for n in grid_sizes() {
                    match run_cell(name, n, Metric::L2, 1e-5, 0.0, threads) {
                        Ok((wall, report)) => {
                            let rel = (report.distance - L2_REF).abs() / L2_REF;
                            line(format!(
                                "{name} {} {} {} {}",
                                n * n,
                                fmt_f(wall),
                                report.iterations,
                                fmt_f(rel)
                            ));
                        }
                        Err(err) => {
                            eprintln!("warning: {}", err.message());
                            line(format!("{name} {} FAILED FAILED FAILED", n * n));
                        }
                    }
                }
            }
        }
        TableId::T2 => {
            line("# manhattan metric, epsilon 0.01, stopping mean-residual <= 1e-9".into());
            line("# example n time_s iterations rel_error".into());
            for name in FIGURE_EXAMPLES {
                for n in grid_sizes() {
                    match run_cell(name, n, Metric::L1, 1e-9, 0.01, threads) {
                        Ok((wall, report)) => {
                            let rel = (report.regularized_distance - L1_REF).abs() / L1_REF;
                            line(format!(
                                "{name} {} {} {} {}",
                                n * n,
                                fmt_f(wall),
                                report.iterations,
                                fmt_f(rel)
                            ));
                        }
                        Err(err) => {
                            eprintln!("warning: {}", err.message());
                            line(format!("{name} {} FAILED FAILED FAILED", n * n));
                        }
                    }
                }
            }
        }
        TableId::T3 => {
            line("# manhattan vs euclidean wall time, stopping mean-residual <= 1e-5".into());
            line("# n time_l1_s time_l2_s".into());
            for n in grid_sizes() {
                let l1 = run_cell(ExampleName::DiracSplit4, n, Metric::L1, 1e-5, 0.01, threads);
                let l2 = run_cell(ExampleName::DiracSplit4, n, Metric::L2, 1e-5, 0.0, threads);
                let show = |r: &Result<(f64, Report), CliError>| match r {
                    Ok((wall, _)) => fmt_f(*wall),
                    Err(err) => {
                        eprintln!("warning: {}", err.message());
                        "FAILED".into()
                    }
                };
                line(format!("{} {} {}", n * n, show(&l1), show(&l2)));
            }
        }
        TableId::T4 => {
            line("# manhattan metric, epsilon 0, stopping mean-residual <= 1e-6".into());
            line("# n rel_error".into());
            for n in [20, 40, 80] {
                match run_cell(ExampleName::DiracSplit4, n, Metric::L1, 1e-6, 0.0, threads) {
                    Ok((_, report)) => {
                        let rel = (report.distance - L1_REF).abs() / L1_REF;
                        line(format!("{} {}", n * n, fmt_f(rel)));
                    }
                    Err(err) => {
                        eprintln!("warning: {}", err.message());
                        line(format!("{} FAILED", n * n));
                    }
                }
            }
        }
        TableId::T5 => {
            line("# manhattan metric, n=1600, stopping mean-residual <= 1e-6".into());
            line("# epsilon rel_error".into());
            for epsilon in [0.1, 0.01, 0.001, 0.0001] {
                match run_cell(ExampleName::DiracSplit4, 40, Metric::L1, 1e-6, epsilon, threads) {
                    Ok((_, report)) => {
                        let rel = (report.regularized_distance - L1_REF).abs() / L1_REF;
                        line(format!("{} {}", fmt_f(epsilon), fmt_f(rel)));
                    }
                    Err(err) => {
                        eprintln!("warning: {}", err.message());
                        line(format!("{} FAILED", fmt_f(epsilon)));
                    }
                }
            }
        }
    }
    out
}

fn file_name(id: TableId) -> &'static str {
    match id {
        TableId::T1 => "table_t1.txt",
        TableId::T2 => "table_t2.txt",
        TableId::T3 => "table_t3.txt",
        TableId::T4 => "table_t4.txt",
        TableId::T5 => "table_t5.txt",
    }
}

pub fn run_table(id: TableId, threads: usize) -> Result<u8, CliError> {
    let table = build_table(id, threads);
    print!("{table}");
    let path = file_name(id);
    std::fs::write(path, &table)
        .map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
    Ok(EXIT_OK)
}
