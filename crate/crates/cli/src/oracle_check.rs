//! Cross-check of the primal-dual solver against the exact assignment
//! oracle on random rational density pairs.
//!
//! The lattice flux problem under the Manhattan cost is a min-cost flow
//! whose optimal value equals the exact EMD with the Manhattan ground
//! metric at vertex coordinates, so on small grids the solver (l1, tight
//! tolerance, tiny epsilon) must land within 1% of the oracle.

use std::sync::Arc;

use emdflux::lattice::LatticeGrid;
use emdflux::oracle::{exact_emd, measure_from_density};
use emdflux::{solve, Config, Density, Metric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::fmt_f;
use crate::{CliError, EXIT_OK};

const MAX_GRID: usize = 8;
const MAX_DENOMINATOR: u32 = 64;
const GAP_LIMIT: f64 = 0.01;

/// Distribute `denominator` unit masses over the vertices uniformly at
/// random; the result is exactly rational with that denominator.
fn random_rational_density(
    grid: &Arc<LatticeGrid<f64>>,
    denominator: u32,
    rng: &mut ChaCha8Rng,
) -> Density {
    let mut counts = vec![0u32; grid.len()];
    for _ in 0..denominator {
        counts[rng.gen_range(0..grid.len())] += 1;
    }
    let mass: Vec<f64> = counts
        .iter()
        .map(|&c| f64::from(c) / f64::from(denominator))
        .collect();
    Density::from_mass(grid.clone(), mass).expect("rational masses are valid")
}

pub fn run_oracle_check(
    grid_n: usize,
    seed: u64,
    denominator: u32,
    instances: usize,
    threads: usize,
) -> Result<u8, CliError> {
    if grid_n == 0 || grid_n > MAX_GRID {
        return Err(CliError::Usage(format!(
            "--oracle-check needs 1 <= --grid <= {MAX_GRID}, got {grid_n}"
        )));
    }
    if denominator == 0 || denominator > MAX_DENOMINATOR {
        return Err(CliError::Usage(format!(
            "--oracle-check needs 1 <= --denominator <= {MAX_DENOMINATOR}, got {denominator}"
        )));
    }
    if instances == 0 {
        return Err(CliError::Usage("--instances must be positive".into()));
    }

    let grid = Arc::new(LatticeGrid::square(grid_n, -2.0, 2.0).map_err(CliError::from)?);
    let mut config = Config::new(Metric::L1);
    config.epsilon = 1e-4;
    config.tol = 1e-9;
    config.mu = grid.spacing() / 4.0;
    config.tau = grid.spacing() / 4.0;
    config.max_iters = 500_000;
    config.threads = threads;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    println!("grid={grid_n}x{grid_n}");
    println!("denominator={denominator}");
    println!("seed={seed}");
    for instance in 0..instances {
        let p0 = random_rational_density(&grid, denominator, &mut rng);
        let p1 = random_rational_density(&grid, denominator, &mut rng);

        let report = solve(&p0, &p1, &config, None, None)?;
        if !report.converged {
            return Err(CliError::Numerical(format!(
                "instance {instance}: solver stalled at {} iterations",
                report.iterations
            )));
        }
        let mu0 = measure_from_density(&p0, denominator).map_err(CliError::from)?;
        let mu1 = measure_from_density(&p1, denominator).map_err(CliError::from)?;
        let exact = exact_emd(&mu0, &mu1, Metric::L1).map_err(CliError::from)?;

        // relative gap, falling back to absolute when the exact value vanishes
        let gap = if exact > 1e-12 {
            (report.distance - exact).abs() / exact
        } else {
            report.distance.abs()
        };
        max_gap = max_gap.max(gap);
        println!(
            "instance={instance} pd={} exact={} gap={}",
            fmt_f(report.distance),
            fmt_f(exact),
            fmt_f(gap)
        );
    }
    println!("max_gap={}", fmt_f(max_gap));

    if max_gap > GAP_LIMIT {
        return Err(CliError::Numerical(format!(
            "solver disagrees with the exact oracle: max gap {max_gap:.3e} > {GAP_LIMIT}"
        )));
    }
    Ok(EXIT_OK)
}
