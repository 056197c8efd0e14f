//! Earth Mover's Distance (Wasserstein-1) between discrete probability
//! densities on a uniform lattice.
//!
//! Instead of solving the quadratic-size transport-plan linear program, this
//! crate minimizes the total norm of a staggered flux field `m` subject to
//! the discrete conservation constraint `div m + p1 - p0 = 0`. The optimal
//! objective equals the EMD with a Manhattan ([`Metric::L1`]) or Euclidean
//! ([`Metric::L2`]) ground metric. A first-order primal-dual iteration with
//! shrink proximal steps drives the solve; see [`solver::solve`].
//!
//! [`oracle`] provides an exact assignment-based reference value for small
//! rational-mass instances, and [`examples`] generates the benchmark density
//! pairs exposed by the CLI.
//!
//! All numerics are generic over a floating-point [`Scalar`] (`f32` or
//! `f64`); the aliases at the crate root fix `f64`, which is what the CLI
//! and the test suites use.

pub mod examples;
pub mod lattice;
pub mod oracle;
pub mod solver;

pub use lattice::{DensityField, DualPotential, FluxField, LatticeGrid};
pub use solver::{solve, Metric, SolveReport, SolverConfig};

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the lattice and solver are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` constant into the working scalar.
#[inline]
pub(crate) fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("fields are defined on different grids")]
    GridMismatch,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite iterate detected at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("flux face ({vertex}, axis {axis}) lies on the boundary and must stay zero")]
    BoundaryFlux { vertex: usize, axis: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("measures carry different denominators: {left} vs {right}")]
    MismatchedDenominators { left: u32, right: u32 },
    #[error("measure not representable over denominator {denominator}: {detail}")]
    NotRepresentable { denominator: u32, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// `f64` lattice grid.
pub type Grid = LatticeGrid<f64>;
/// `f64` density field.
pub type Density = DensityField<f64>;
/// `f64` flux field.
pub type Flux = FluxField<f64>;
/// `f64` dual potential.
pub type Potential = DualPotential<f64>;
/// `f64` solver configuration.
pub type Config = SolverConfig<f64>;
/// `f64` solve report.
pub type Report = SolveReport<f64>;
