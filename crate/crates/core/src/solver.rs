//! Primal-dual solver for the lattice flux-minimization problem.
//!
//! Each iteration alternates a proximal descent in the flux with a gradient
//! ascent in the vertex potential driven by the conservation defect of the
//! extrapolated flux:
//!
//! ```text
//! m^{k+1}   = prox(m^k + mu * grad(phi^k))
//! phi^{k+1} = phi^k + tau * (div(m^{k+1} + theta (m^{k+1} - m^k)) + p1 - p0)
//! ```
//!
//! The proximal map is a vector shrink per vertex under the Euclidean
//! metric and a scalar shrink per face under the Manhattan metric, where the
//! latter is damped by `1/(1 + eps*mu)` when the quadratic regularization is
//! on. Convergence is guaranteed for `theta = 1` and
//! `tau * mu * ||K||^2 < 1`, `K` being the discrete divergence operator;
//! [`operator_norm_bound`] supplies the analytic bound `4d/dx^2` used to
//! validate configurations.

use std::sync::Arc;

use crate::lattice::{
    advance_multi_index, mean_residual_raw, same_grid, DensityField, DualPotential, FluxField,
    LatticeGrid,
};
use crate::{cast, Error, Result, Scalar};

/// Ground metric selecting the per-face cost and proximal operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Manhattan ground metric: cost `sum |m_f|`, scalar shrink per face.
    L1,
    /// Euclidean ground metric: cost `sum_i ||m_i||_2`, vector shrink per vertex.
    L2,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::L1 => write!(f, "l1"),
            Metric::L2 => write!(f, "l2"),
        }
    }
}

/// Step sizes, regularization, and stopping parameters for [`solve`].
///
/// Defaults mirror the reference setup on a 40x40 grid over `[-2,2]^2`
/// (`dx = 0.1`): `mu = tau = 0.025`, `theta = 1`, `eps = 0.01`,
/// stopping at mean residual `1e-5`. On other grids pick
/// `mu = tau = dx/4`, which keeps `tau*mu*||K||^2 = d/4` on every mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub metric: Metric,
    /// Primal step.
    pub mu: T,
    /// Dual step.
    pub tau: T,
    /// Extrapolation weight in `[0, 1]`.
    pub theta: T,
    /// Quadratic regularization weight; only the L1 path uses it. Zero is
    /// allowed but forfeits uniqueness of the minimizer.
    pub epsilon: T,
    /// Stopping threshold on the mean divergence residual.
    pub tol: T,
    pub max_iters: usize,
    /// Residual is evaluated every this many iterations.
    pub residual_check_interval: usize,
    /// Reject (instead of warn) when `tau*mu*||K||^2 >= 1`.
    pub strict_steps: bool,
    /// Worker threads for the per-face/per-vertex update maps. Results are
    /// bit-identical for every thread count.
    pub threads: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(metric: Metric) -> Self {
        Self {
            metric,
            mu: cast(0.025),
            tau: cast(0.025),
            theta: T::one(),
            epsilon: match metric {
                Metric::L1 => cast(0.01),
                Metric::L2 => T::zero(),
            },
            tol: cast(1e-5),
            max_iters: 100_000,
            residual_check_interval: 1,
            strict_steps: false,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |b: bool, msg: &str| {
            if b {
                Ok(())
            } else {
                Err(Error::InvalidConfig(msg.into()))
            }
        };
        ok(self.mu > T::zero() && self.mu.is_finite(), "mu must be positive")?;
        ok(self.tau > T::zero() && self.tau.is_finite(), "tau must be positive")?;
        ok(
            self.theta >= T::zero() && self.theta <= T::one(),
            "theta must lie in [0, 1]",
        )?;
        ok(
            self.epsilon >= T::zero() && self.epsilon.is_finite(),
            "epsilon must be nonnegative",
        )?;
        ok(self.tol > T::zero(), "tol must be positive")?;
        ok(self.max_iters > 0, "max_iters must be positive")?;
        ok(
            self.residual_check_interval > 0,
            "residual_check_interval must be positive",
        )?;
        ok(self.threads > 0, "threads must be positive")?;
        Ok(())
    }
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self::new(Metric::L2)
    }
}

/// Outcome of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    /// Flux at termination.
    pub flux: FluxField<T>,
    /// Dual potential at termination.
    pub potential: DualPotential<T>,
    /// Cost functional of the flux under the configured metric.
    pub distance: T,
    /// `distance + (eps/2) ||m||_2^2` on the L1 path; equals `distance`
    /// otherwise.
    pub regularized_distance: T,
    /// Completed primal/dual iteration pairs.
    pub iterations: usize,
    /// `(iteration, mean residual)` at every residual check.
    pub residual_history: Vec<(usize, T)>,
    pub converged: bool,
}

/// Scalar soft-threshold `sign(y) * max(|y| - alpha, 0)`.
///
/// The dead zone is closed: `|y| = alpha` maps to 0.
#[inline]
pub fn shrink<T: Scalar>(y: T, alpha: T) -> T {
    debug_assert!(alpha >= T::zero());
    let slack = y.abs() - alpha;
    if slack > T::zero() {
        slack * y.signum()
    } else {
        T::zero()
    }
}

#[inline]
fn shrink2_scale<T: Scalar>(norm: T, alpha: T) -> T {
    if norm > alpha {
        (norm - alpha) / norm
    } else {
        T::zero()
    }
}

/// Vector soft-threshold `(y/||y||_2) * max(||y||_2 - alpha, 0)`; the zero
/// vector maps to itself (no division happens when the max factor is 0).
pub fn shrink2<T: Scalar>(y: &[T], alpha: T) -> Vec<T> {
    debug_assert!(alpha >= T::zero());
    let norm = y.iter().map(|&c| c * c).sum::<T>().sqrt();
    let scale = shrink2_scale(norm, alpha);
    y.iter().map(|&c| c * scale).collect()
}

/// Per-face kernel for the Manhattan primal step over `vertices`, writing
/// into the matching chunk of the output flux.
fn primal_l1_range<T: Scalar>(
    grid: &LatticeGrid<T>,
    phi: &[T],
    m_old: &[T],
    out: &mut [T],
    vertices: std::ops::Range<usize>,
    mu: T,
    damp: T,
) {
    let d = grid.dims();
    let shape = grid.shape();
    let strides = grid.strides();
    let inv_h = T::one() / grid.spacing();
    let mut idx = grid.multi_index(vertices.start.min(grid.len().saturating_sub(1)));
    for (local, i) in vertices.enumerate() {
        for v in 0..d {
            let g = if idx[v] + 1 < shape[v] {
                (phi[i + strides[v]] - phi[i]) * inv_h
            } else {
                T::zero()
            };
            out[local * d + v] = shrink(m_old[i * d + v] + mu * g, mu) * damp;
        }
        advance_multi_index(shape, &mut idx);
    }
}

/// Per-vertex kernel for the Euclidean primal step (vector shrink of the
/// whole face tuple at each vertex).
fn primal_l2_range<T: Scalar>(
    grid: &LatticeGrid<T>,
    phi: &[T],
    m_old: &[T],
    out: &mut [T],
    vertices: std::ops::Range<usize>,
    mu: T,
) {
    let d = grid.dims();
    let shape = grid.shape();
    let strides = grid.strides();
    let inv_h = T::one() / grid.spacing();
    let mut idx = grid.multi_index(vertices.start.min(grid.len().saturating_sub(1)));
    for (local, i) in vertices.enumerate() {
        let row = &mut out[local * d..(local + 1) * d];
        let mut norm_sq = T::zero();
        for (v, slot) in row.iter_mut().enumerate() {
            let g = if idx[v] + 1 < shape[v] {
                (phi[i + strides[v]] - phi[i]) * inv_h
            } else {
                T::zero()
            };
            let y = m_old[i * d + v] + mu * g;
            *slot = y;
            norm_sq += y * y;
        }
        let scale = shrink2_scale(norm_sq.sqrt(), mu);
        for slot in row.iter_mut() {
            *slot *= scale;
        }
        advance_multi_index(shape, &mut idx);
    }
}

/// Per-vertex kernel for the dual ascent using the extrapolated flux
/// `m_new + theta (m_new - m_old)`; `dp` holds `p1 - p0`.
#[allow(clippy::too_many_arguments)]
fn dual_range<T: Scalar>(
    grid: &LatticeGrid<T>,
    m_new: &[T],
    m_old: &[T],
    dp: &[T],
    phi_out: &mut [T],
    vertices: std::ops::Range<usize>,
    tau: T,
    theta: T,
) {
    let d = grid.dims();
    let shape = grid.shape();
    let strides = grid.strides();
    let inv_h = T::one() / grid.spacing();
    let extrapolate = |f: usize| m_new[f] + theta * (m_new[f] - m_old[f]);
    let mut idx = grid.multi_index(vertices.start.min(grid.len().saturating_sub(1)));
    for (local, i) in vertices.enumerate() {
        let mut acc = T::zero();
        for v in 0..d {
            let up = extrapolate(i * d + v);
            let down = if idx[v] > 0 {
                extrapolate((i - strides[v]) * d + v)
            } else {
                T::zero()
            };
            acc += up - down;
        }
        phi_out[local] += tau * (acc * inv_h + dp[i]);
        advance_multi_index(shape, &mut idx);
    }
}

/// Split `0..n` into at most `parts` contiguous chunks of near-equal size.
fn chunk_ranges(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1).min(n.max(1));
    let base = n / parts;
    let extra = n % parts;
    let mut ranges = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        ranges.push(start..start + len);
        start += len;
    }
    ranges
}

/// Run `kernel` over vertex chunks, each writing its own slice of `out`.
/// Chunk boundaries depend only on `(n, threads)`, and every element is
/// computed by the same expressions as in the sequential pass, so the output
/// is bit-identical for any thread count.
fn run_chunked<T, F>(out: &mut [T], per_vertex: usize, n: usize, threads: usize, kernel: F)
where
    T: Scalar,
    F: Fn(&mut [T], std::ops::Range<usize>) + Sync,
{
    if threads <= 1 || n < 2 {
        kernel(out, 0..n);
        return;
    }
    let ranges = chunk_ranges(n, threads);
    std::thread::scope(|scope| {
        let mut rest = out;
        for range in ranges {
            let (chunk, tail) = rest.split_at_mut(range.len() * per_vertex);
            rest = tail;
            let kernel = &kernel;
            scope.spawn(move || kernel(chunk, range));
        }
    });
}

fn require_same_grid<T: Scalar>(a: &Arc<LatticeGrid<T>>, b: &Arc<LatticeGrid<T>>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// One Euclidean primal step: per vertex,
/// `m_{i+1/2} <- shrink2(m^k_{i+1/2} + mu * grad(phi)_{i+1/2}, mu)`.
pub fn primal_update_l2<T: Scalar>(
    m_prev: &FluxField<T>,
    phi: &DualPotential<T>,
    mu: T,
) -> Result<FluxField<T>> {
    require_same_grid(m_prev.grid(), phi.grid())?;
    assert!(mu > T::zero(), "mu must be positive");
    let grid = m_prev.grid().clone();
    let mut out = FluxField::zeros(grid.clone());
    primal_l2_range(&grid, phi.values(), m_prev.values(), out.values_mut(), 0..grid.len(), mu);
    Ok(out)
}

/// One Manhattan primal step: per face,
/// `m <- shrink(m^k + mu * grad(phi), mu) / (1 + eps*mu)`.
pub fn primal_update_l1<T: Scalar>(
    m_prev: &FluxField<T>,
    phi: &DualPotential<T>,
    mu: T,
    epsilon: T,
) -> Result<FluxField<T>> {
    require_same_grid(m_prev.grid(), phi.grid())?;
    assert!(mu > T::zero(), "mu must be positive");
    assert!(epsilon >= T::zero(), "epsilon must be nonnegative");
    let grid = m_prev.grid().clone();
    let damp = T::one() / (T::one() + epsilon * mu);
    let mut out = FluxField::zeros(grid.clone());
    primal_l1_range(&grid, phi.values(), m_prev.values(), out.values_mut(), 0..grid.len(), mu, damp);
    Ok(out)
}

/// One dual ascent step:
/// `phi_i <- phi_i + tau * (div(m^{k+1} + theta (m^{k+1} - m^k))_i + p1_i - p0_i)`.
pub fn dual_update<T: Scalar>(
    phi_prev: &DualPotential<T>,
    m_next: &FluxField<T>,
    m_prev: &FluxField<T>,
    p0: &DensityField<T>,
    p1: &DensityField<T>,
    tau: T,
    theta: T,
) -> Result<DualPotential<T>> {
    let grid = phi_prev.grid().clone();
    for other in [m_next.grid(), m_prev.grid(), p0.grid(), p1.grid()] {
        require_same_grid(&grid, other)?;
    }
    assert!(tau > T::zero(), "tau must be positive");
    assert!(theta >= T::zero() && theta <= T::one(), "theta must lie in [0, 1]");
    let dp: Vec<T> = p1.mass().iter().zip(p0.mass()).map(|(&b, &a)| b - a).collect();
    let mut out = phi_prev.clone();
    dual_range(
        &grid,
        m_next.values(),
        m_prev.values(),
        &dp,
        out.values_mut(),
        0..grid.len(),
        tau,
        theta,
    );
    Ok(out)
}

/// Cost functional: `sum_i ||m_{i+1/2}||_2` under [`Metric::L2`],
/// `sum_{i,v} |m_{i+e_v/2}|` under [`Metric::L1`].
pub fn cost<T: Scalar>(m: &FluxField<T>, metric: Metric) -> T {
    let d = m.grid().dims();
    match metric {
        Metric::L1 => {
            let mut total = T::zero();
            for &x in m.values() {
                total += x.abs();
            }
            total
        }
        Metric::L2 => {
            let mut total = T::zero();
            for row in m.values().chunks_exact(d) {
                let mut norm_sq = T::zero();
                for &x in row {
                    norm_sq += x * x;
                }
                total += norm_sq.sqrt();
            }
            total
        }
    }
}

fn squared_norm<T: Scalar>(values: &[T]) -> T {
    let mut total = T::zero();
    for &x in values {
        total += x * x;
    }
    total
}

/// Analytic upper bound `4d/dx^2` on the squared operator norm of the
/// discrete divergence: each one-dimensional forward difference has operator
/// norm at most `2/dx` and the axis contributions add in the quadratic form.
pub fn operator_norm_bound<T: Scalar>(grid: &LatticeGrid<T>) -> T {
    let d = T::from_usize(grid.dims()).unwrap();
    cast::<T>(4.0) * d / (grid.spacing() * grid.spacing())
}

/// Normalization slack accepted at solve entry.
fn normalization_tolerance<T: Scalar>() -> T {
    cast::<T>(1e-9).max(T::epsilon() * cast::<T>(100.0))
}

/// Minimize the flux cost subject to `div m + p1 - p0 = 0` by primal-dual
/// iteration, starting from `m0`/`phi0` (all zeros when absent).
///
/// Iterates until the mean divergence residual drops to `config.tol` or
/// `config.max_iters` is reached. Inputs must be normalized; the step-size
/// product is validated against [`operator_norm_bound`], rejecting in strict
/// mode and logging a warning otherwise. A non-finite residual aborts with
/// [`Error::Diverged`] naming the iteration.
pub fn solve<T: Scalar>(
    p0: &DensityField<T>,
    p1: &DensityField<T>,
    config: &SolverConfig<T>,
    m0: Option<FluxField<T>>,
    phi0: Option<DualPotential<T>>,
) -> Result<SolveReport<T>> {
    config.validate()?;
    let grid = p0.grid().clone();
    require_same_grid(&grid, p1.grid())?;

    let norm_tol = normalization_tolerance::<T>();
    for (name, p) in [("p0", p0), ("p1", p1)] {
        let total = p.total();
        if (total - T::one()).abs() > norm_tol {
            return Err(Error::InvalidMeasure(format!(
                "{name} must sum to 1 (got {total})"
            )));
        }
    }

    let bound = operator_norm_bound(&grid);
    let product = config.tau * config.mu * bound;
    if product >= T::one() {
        if config.strict_steps {
            return Err(Error::InvalidConfig(format!(
                "step sizes violate tau*mu*||K||^2 < 1: {product} >= 1"
            )));
        }
        log::warn!(
            "step sizes violate tau*mu*||K||^2 < 1 ({product} >= 1); iteration may diverge"
        );
    }
    if config.metric == Metric::L1 && config.epsilon == T::zero() {
        log::warn!("epsilon = 0: the L1 minimizer may not be unique");
    }

    let mut m_old = match m0 {
        Some(m) => {
            require_same_grid(&grid, m.grid())?;
            m
        }
        None => FluxField::zeros(grid.clone()),
    };
    let mut phi = match phi0 {
        Some(p) => {
            require_same_grid(&grid, p.grid())?;
            p
        }
        None => DualPotential::zeros(grid.clone()),
    };
    let mut m_new = FluxField::zeros(grid.clone());

    let dp: Vec<T> = p1.mass().iter().zip(p0.mass()).map(|(&b, &a)| b - a).collect();
    let damp = T::one() / (T::one() + config.epsilon * config.mu);
    let n = grid.len();
    let d = grid.dims();

    let mut history: Vec<(usize, T)> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iters {
        iterations = k;
        {
            let phi_vals = phi.values();
            let m_old_vals = m_old.values();
            let out = m_new.values_mut();
            match config.metric {
                Metric::L1 => run_chunked(out, d, n, config.threads, |chunk, range| {
                    primal_l1_range(&grid, phi_vals, m_old_vals, chunk, range, config.mu, damp)
                }),
                Metric::L2 => run_chunked(out, d, n, config.threads, |chunk, range| {
                    primal_l2_range(&grid, phi_vals, m_old_vals, chunk, range, config.mu)
                }),
            }
        }
        {
            let m_new_vals = m_new.values();
            let m_old_vals = m_old.values();
            let out = phi.values_mut();
            run_chunked(out, 1, n, config.threads, |chunk, range| {
                dual_range(
                    &grid,
                    m_new_vals,
                    m_old_vals,
                    &dp,
                    chunk,
                    range,
                    config.tau,
                    config.theta,
                )
            });
        }
        std::mem::swap(&mut m_old, &mut m_new); // m_old now holds m^{k+1}

        if k % config.residual_check_interval == 0 || k == config.max_iters {
            let res = mean_residual_raw(&grid, m_old.values(), p0.mass(), p1.mass());
            if !res.is_finite() {
                return Err(Error::Diverged { iteration: k });
            }
            history.push((k, res));
            if res <= config.tol {
                converged = true;
                break;
            }
        }
    }

    let distance = cost(&m_old, config.metric);
    let regularized_distance = match config.metric {
        Metric::L1 => {
            distance + config.epsilon / cast::<T>(2.0) * squared_norm(m_old.values())
        }
        Metric::L2 => distance,
    };

    Ok(SolveReport {
        flux: m_old,
        potential: phi,
        distance,
        regularized_distance,
        iterations,
        residual_history: history,
        converged,
    })
}
