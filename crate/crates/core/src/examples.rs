//! Generators for the benchmark density pairs, parameterized by grid so the
//! distance tables and figures are reproducible by name.
//!
//! All five pairs live on a 2D grid. Diracs snap to the nearest cell-center
//! vertex (ties toward negative coordinates, see [`LatticeGrid::snap`]);
//! smooth densities are evaluated pointwise at cell centers and normalized.

use std::sync::Arc;

use crate::lattice::{DensityField, LatticeGrid};
use crate::{cast, Error, Result, Scalar};

/// Stable identifiers for the benchmark pairs; the CLI accepts these names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleName {
    /// Unit mass at (0,0) moving to (0.4, 0.4).
    DiracPair,
    /// Unit mass at (0,0) splitting in half toward (0.4,0.4) and (-0.4,-0.4).
    DiracSplit2,
    /// Unit mass at (0,0) splitting into quarters toward the four corners
    /// (+-0.4, +-0.4).
    DiracSplit4,
    /// Unit mass at (0,0) spreading onto a narrow ring.
    DiracToRing,
    /// A four-lobed blob relaxing onto a broad ring.
    CrossToRing,
}

impl ExampleName {
    pub const ALL: [ExampleName; 5] = [
        ExampleName::DiracPair,
        ExampleName::DiracSplit2,
        ExampleName::DiracSplit4,
        ExampleName::DiracToRing,
        ExampleName::CrossToRing,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleName::DiracPair => "dirac_pair",
            ExampleName::DiracSplit2 => "dirac_split2",
            ExampleName::DiracSplit4 => "dirac_split4",
            ExampleName::DiracToRing => "dirac_to_ring",
            ExampleName::CrossToRing => "cross_to_ring",
        }
    }

    /// Shape parameter used when none is given: the ring target is narrow
    /// (`sigma = 1e-3`) for `dirac_to_ring` and broad (`sigma = 0.2`) for
    /// `cross_to_ring`; the pure Dirac pairs ignore it.
    pub fn default_sigma(&self) -> f64 {
        match self {
            ExampleName::DiracToRing => 1e-3,
            _ => 0.2,
        }
    }
}

impl std::str::FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleName::ALL
            .iter()
            .copied()
            .find(|name| name.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown example '{s}' (expected one of: {})",
                    ExampleName::ALL.map(|n| n.as_str()).join(", ")
                ))
            })
    }
}

impl std::fmt::Display for ExampleName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named density pair on a concrete grid.
#[derive(Debug, Clone)]
pub struct ExampleSpec<T> {
    pub name: ExampleName,
    pub grid: Arc<LatticeGrid<T>>,
    /// Positive shape parameter for the smooth densities.
    pub sigma: T,
}

impl<T: Scalar> ExampleSpec<T> {
    /// Spec with the per-example default shape parameter.
    pub fn new(name: ExampleName, grid: Arc<LatticeGrid<T>>) -> Result<Self> {
        if grid.dims() != 2 {
            return Err(Error::InvalidGrid(format!(
                "examples are 2D; grid has {} axes",
                grid.dims()
            )));
        }
        Ok(Self { name, grid, sigma: cast(name.default_sigma()) })
    }

    pub fn with_sigma(mut self, sigma: T) -> Result<Self> {
        if sigma <= T::zero() || !sigma.is_finite() {
            return Err(Error::InvalidConfig("sigma must be positive".into()));
        }
        self.sigma = sigma;
        Ok(self)
    }
}

/// One-hot density at the vertex nearest to `(x, y)`.
fn snapped_dirac<T: Scalar>(grid: &Arc<LatticeGrid<T>>, x: T, y: T) -> Result<Vec<T>> {
    let mut mass = vec![T::zero(); grid.len()];
    // grid axes are (y, x): axis 0 slow, axis 1 fast
    let i = grid.snap(&[y, x])?;
    mass[i] = T::one();
    Ok(mass)
}

/// Evaluate `exp(log_density)` at every cell center with the max subtracted
/// first, so narrow profiles neither overflow nor vanish.
fn stable_density<T: Scalar>(
    grid: &Arc<LatticeGrid<T>>,
    log_density: impl Fn(T, T) -> T,
) -> Vec<T> {
    let mut logs = Vec::with_capacity(grid.len());
    let mut max = T::neg_infinity();
    for i in 0..grid.len() {
        let c = grid.coordinate(i);
        let value = log_density(c[1], c[0]);
        if value > max {
            max = value;
        }
        logs.push(value);
    }
    logs.into_iter().map(|l| (l - max).exp()).collect()
}

/// Ring profile `exp((r^2 - r^4)/sigma)`, peaked at radius `1/sqrt(2)`.
fn ring_log_density<T: Scalar>(x: T, y: T, sigma: T) -> T {
    let t = x * x + y * y;
    (t - t * t) / sigma
}

/// Four-lobed profile `exp(-(r^2 - |x| - |y|)/sigma)`.
fn cross_log_density<T: Scalar>(x: T, y: T, sigma: T) -> T {
    -(x * x + y * y - x.abs() - y.abs()) / sigma
}

/// Build the requested density pair; both fields are normalized on the
/// spec's grid.
pub fn generate<T: Scalar>(spec: &ExampleSpec<T>) -> Result<(DensityField<T>, DensityField<T>)> {
    let grid = &spec.grid;
    let sigma = spec.sigma;
    let c = |x: f64| cast::<T>(x);
    let sum_diracs = |targets: &[(f64, f64)]| -> Result<Vec<T>> {
        let mut mass = vec![T::zero(); grid.len()];
        let share = T::one() / T::from_usize(targets.len()).unwrap();
        for &(x, y) in targets {
            let one_hot = snapped_dirac(grid, c(x), c(y))?;
            for (slot, v) in mass.iter_mut().zip(one_hot) {
                *slot += v * share;
            }
        }
        Ok(mass)
    };

    let (raw0, raw1) = match spec.name {
        ExampleName::DiracPair => (
            snapped_dirac(grid, T::zero(), T::zero())?,
            sum_diracs(&[(0.4, 0.4)])?,
        ),
        ExampleName::DiracSplit2 => (
            snapped_dirac(grid, T::zero(), T::zero())?,
            sum_diracs(&[(0.4, 0.4), (-0.4, -0.4)])?,
        ),
        ExampleName::DiracSplit4 => (
            snapped_dirac(grid, T::zero(), T::zero())?,
            sum_diracs(&[(0.4, 0.4), (0.4, -0.4), (-0.4, 0.4), (-0.4, -0.4)])?,
        ),
        ExampleName::DiracToRing => (
            snapped_dirac(grid, T::zero(), T::zero())?,
            stable_density(grid, |x, y| ring_log_density(x, y, sigma)),
        ),
        ExampleName::CrossToRing => (
            stable_density(grid, |x, y| cross_log_density(x, y, sigma)),
            stable_density(grid, |x, y| ring_log_density(x, y, sigma)),
        ),
    };
    Ok((
        DensityField::normalize(grid.clone(), &raw0)?,
        DensityField::normalize(grid.clone(), &raw1)?,
    ))
}
