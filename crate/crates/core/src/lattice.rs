//! Uniform lattice geometry, discrete measures, staggered flux fields, and
//! the divergence/gradient operators with zero-flux boundaries.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * Multi-indices linearize row-major with the **last axis fastest**. A 2D
//!   grid therefore uses raster order: shape `[ny, nx]`, axis 0 is y, axis 1
//!   is x, and the x-neighbor of a vertex is adjacent in linear index.
//! * Vertices are cell-centered: vertex `i` sits at `origin + i * spacing`
//!   per axis, with `origin = domain_min + spacing / 2`.
//! * The flux entry `(i, v)` lives on the face between vertex `i` and its
//!   `+v` neighbor and stores the face-integrated flux (units of mass).
//!   Faces leaving the grid (vertex last along `v`) are pinned to zero; this
//!   is the zero-flux boundary condition.
//!
//! Under these conventions divergence and gradient are exact negative
//! adjoints: `<phi, div m> + <grad phi, m> = 0` up to roundoff, which is what
//! makes the primal and dual halves of the solver consistent.

use std::sync::Arc;

use crate::{cast, Error, Result, Scalar};

/// Relative slack used to detect snapping ties; well above float noise from
/// the index arithmetic, well below half a cell.
const SNAP_TIE_EPS: f64 = 1e-9;

/// Geometry of a uniform d-dimensional lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGrid<T> {
    shape: Vec<usize>,
    spacing: T,
    origin: Vec<T>,
    strides: Vec<usize>,
    len: usize,
}

impl<T: Scalar> LatticeGrid<T> {
    /// Grid with the given shape, uniform spacing, and first-vertex
    /// coordinates.
    pub fn new(shape: Vec<usize>, spacing: T, origin: Vec<T>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidGrid("shape must have at least one axis".into()));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidGrid("every shape entry must be >= 1".into()));
        }
        if spacing <= T::zero() || !spacing.is_finite() {
            return Err(Error::InvalidGrid("spacing must be positive and finite".into()));
        }
        if origin.len() != shape.len() {
            return Err(Error::DimensionMismatch { left: origin.len(), right: shape.len() });
        }
        if origin.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let mut strides = vec![1usize; shape.len()];
        for axis in (0..shape.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1]
                .checked_mul(shape[axis + 1])
                .ok_or_else(|| Error::InvalidGrid("vertex count overflows usize".into()))?;
        }
        let len = strides[0]
            .checked_mul(shape[0])
            .ok_or_else(|| Error::InvalidGrid("vertex count overflows usize".into()))?;
        Ok(Self { shape, spacing, origin, strides, len })
    }

    /// Cell-centered grid covering `[min, min + n*spacing]` per axis: the
    /// first vertex sits half a cell inside the domain.
    pub fn centered(shape: Vec<usize>, domain_min: Vec<T>, spacing: T) -> Result<Self> {
        let half = spacing / cast::<T>(2.0);
        let origin = domain_min.into_iter().map(|lo| lo + half).collect();
        Self::new(shape, spacing, origin)
    }

    /// Cell-centered n-by-n 2D grid over the square `[lo, hi]^2`.
    pub fn square(n: usize, lo: T, hi: T) -> Result<Self> {
        if hi <= lo {
            return Err(Error::InvalidGrid("domain must have positive extent".into()));
        }
        let spacing = (hi - lo) / T::from_usize(n).ok_or_else(|| {
            Error::InvalidGrid("grid size not representable in scalar".into())
        })?;
        Self::centered(vec![n, n], vec![lo, lo], spacing)
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    /// Total vertex count N.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn origin(&self) -> &[T] {
        &self.origin
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Linear index of a multi-index (row-major, last axis fastest).
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims());
        debug_assert!(idx.iter().zip(&self.shape).all(|(&i, &n)| i < n));
        idx.iter().zip(&self.strides).map(|(&i, &s)| i * s).sum()
    }

    /// Multi-index of a linear index.
    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        debug_assert!(i < self.len);
        self.strides
            .iter()
            .zip(&self.shape)
            .map(|(&s, &n)| (i / s) % n)
            .collect()
    }

    /// Position of vertex `i` along `axis`.
    #[inline]
    pub fn axis_position(&self, i: usize, axis: usize) -> usize {
        (i / self.strides[axis]) % self.shape[axis]
    }

    /// Whether vertex `i` is the last along `axis` (its `+axis` face is a
    /// boundary face).
    #[inline]
    pub fn is_last_along(&self, i: usize, axis: usize) -> bool {
        self.axis_position(i, axis) + 1 == self.shape[axis]
    }

    /// Whether vertex `i` is the first along `axis`.
    #[inline]
    pub fn is_first_along(&self, i: usize, axis: usize) -> bool {
        self.axis_position(i, axis) == 0
    }

    /// Coordinates of vertex `i`.
    pub fn coordinate(&self, i: usize) -> Vec<T> {
        self.multi_index(i)
            .iter()
            .zip(&self.origin)
            .map(|(&k, &o)| o + self.spacing * T::from_usize(k).unwrap())
            .collect()
    }

    /// Nearest vertex to `point`; exact ties snap toward the more negative
    /// coordinate.
    pub fn snap(&self, point: &[T]) -> Result<usize> {
        if point.len() != self.dims() {
            return Err(Error::DimensionMismatch { left: point.len(), right: self.dims() });
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("snap target".into()));
        }
        let tie = self.spacing * cast::<T>(SNAP_TIE_EPS);
        let mut linear = 0usize;
        for (axis, &target) in point.iter().enumerate() {
            let n = self.shape[axis];
            let t = (target - self.origin[axis]) / self.spacing;
            let lo = if t <= T::zero() {
                0
            } else {
                (t.floor().to_usize().unwrap_or(n - 1)).min(n - 1)
            };
            let hi = (lo + 1).min(n - 1);
            let coord = |k: usize| self.origin[axis] + self.spacing * T::from_usize(k).unwrap();
            let d_lo = (target - coord(lo)).abs();
            let d_hi = (coord(hi) - target).abs();
            // the upper vertex wins only when strictly closer beyond the tie slack
            let k = if d_hi + tie < d_lo { hi } else { lo };
            linear += k * self.strides[axis];
        }
        Ok(linear)
    }
}

/// Advance a multi-index one step in row-major order (last axis fastest).
#[inline]
pub(crate) fn advance_multi_index(shape: &[usize], idx: &mut [usize]) {
    for axis in (0..shape.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < shape[axis] {
            return;
        }
        idx[axis] = 0;
    }
}

/// Neumaier-compensated sum; used where a plain sum would not meet the
/// normalization tolerance on large grids.
pub(crate) fn compensated_sum<T: Scalar>(values: &[T]) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for &x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A discrete probability measure: one nonnegative mass per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    grid: Arc<LatticeGrid<T>>,
    mass: Vec<T>,
}

impl<T: Scalar> DensityField<T> {
    /// Build a density from raw nonnegative masses, scaling them to total 1.
    ///
    /// Errors when any entry is negative or non-finite, or when all entries
    /// are zero.
    pub fn normalize(grid: Arc<LatticeGrid<T>>, raw: &[T]) -> Result<Self> {
        if raw.len() != grid.len() {
            return Err(Error::DimensionMismatch { left: raw.len(), right: grid.len() });
        }
        for (i, &x) in raw.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("mass at vertex {i}")));
            }
            if x < T::zero() {
                return Err(Error::InvalidMeasure(format!("negative mass at vertex {i}")));
            }
        }
        let total = compensated_sum(raw);
        if total <= T::zero() {
            return Err(Error::InvalidMeasure("all masses are zero".into()));
        }
        let mass = raw.iter().map(|&x| x / total).collect();
        Ok(Self { grid, mass })
    }

    /// Wrap masses without rescaling. Entries must be nonnegative and finite;
    /// the sum is not checked (the solver checks it at entry).
    pub fn from_mass(grid: Arc<LatticeGrid<T>>, mass: Vec<T>) -> Result<Self> {
        if mass.len() != grid.len() {
            return Err(Error::DimensionMismatch { left: mass.len(), right: grid.len() });
        }
        for (i, &x) in mass.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("mass at vertex {i}")));
            }
            if x < T::zero() {
                return Err(Error::InvalidMeasure(format!("negative mass at vertex {i}")));
            }
        }
        Ok(Self { grid, mass })
    }

    pub fn grid(&self) -> &Arc<LatticeGrid<T>> {
        &self.grid
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    /// Compensated total mass.
    pub fn total(&self) -> T {
        compensated_sum(&self.mass)
    }
}

/// Staggered flux field: one scalar per (vertex, axis) face, stored
/// row-major by vertex with the axis innermost (`values[i * d + v]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField<T> {
    grid: Arc<LatticeGrid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> FluxField<T> {
    pub fn zeros(grid: Arc<LatticeGrid<T>>) -> Self {
        let values = vec![T::zero(); grid.len() * grid.dims()];
        Self { grid, values }
    }

    /// Wrap raw face values, enforcing the zero-flux boundary invariant.
    pub fn from_values(grid: Arc<LatticeGrid<T>>, values: Vec<T>) -> Result<Self> {
        let d = grid.dims();
        if values.len() != grid.len() * d {
            return Err(Error::DimensionMismatch { left: values.len(), right: grid.len() * d });
        }
        for (f, &x) in values.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("flux at face {f}")));
            }
            let (vertex, axis) = (f / d, f % d);
            if grid.is_last_along(vertex, axis) && x != T::zero() {
                return Err(Error::BoundaryFlux { vertex, axis });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<LatticeGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn face(&self, vertex: usize, axis: usize) -> T {
        self.values[vertex * self.grid.dims() + axis]
    }

    /// Set one face value; rejects nonzero values on boundary faces.
    pub fn set_face(&mut self, vertex: usize, axis: usize, value: T) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("flux at face ({vertex}, {axis})")));
        }
        if self.grid.is_last_along(vertex, axis) && value != T::zero() {
            return Err(Error::BoundaryFlux { vertex, axis });
        }
        let d = self.grid.dims();
        self.values[vertex * d + axis] = value;
        Ok(())
    }
}

/// Per-vertex Lagrange multiplier values.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential<T> {
    grid: Arc<LatticeGrid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> DualPotential<T> {
    pub fn zeros(grid: Arc<LatticeGrid<T>>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    /// Wrap raw potential values; every entry must be finite.
    pub fn from_values(grid: Arc<LatticeGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { left: values.len(), right: grid.len() });
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("potential at vertex {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<LatticeGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

pub(crate) fn same_grid<T: Scalar>(a: &Arc<LatticeGrid<T>>, b: &Arc<LatticeGrid<T>>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Discrete divergence kernel over raw slices.
pub(crate) fn divergence_into<T: Scalar>(grid: &LatticeGrid<T>, m: &[T], out: &mut [T]) {
    let d = grid.dims();
    let shape = grid.shape();
    let strides = grid.strides();
    let inv_h = T::one() / grid.spacing();
    let mut idx = vec![0usize; d];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for v in 0..d {
            let up = m[i * d + v];
            let down = if idx[v] > 0 { m[(i - strides[v]) * d + v] } else { T::zero() };
            acc += up - down;
        }
        *slot = acc * inv_h;
        advance_multi_index(shape, &mut idx);
    }
}

/// Forward-difference gradient kernel over raw slices; boundary faces get 0.
pub(crate) fn gradient_into<T: Scalar>(grid: &LatticeGrid<T>, phi: &[T], out: &mut [T]) {
    let d = grid.dims();
    let shape = grid.shape();
    let strides = grid.strides();
    let inv_h = T::one() / grid.spacing();
    let mut idx = vec![0usize; d];
    for i in 0..grid.len() {
        for v in 0..d {
            out[i * d + v] = if idx[v] + 1 < shape[v] {
                (phi[i + strides[v]] - phi[i]) * inv_h
            } else {
                T::zero()
            };
        }
        advance_multi_index(shape, &mut idx);
    }
}

/// Mean absolute conservation defect `(1/N) sum_i |div(m)_i + p1_i - p0_i|`,
/// accumulated in a fixed order.
pub(crate) fn mean_residual_raw<T: Scalar>(
    grid: &LatticeGrid<T>,
    m: &[T],
    p0: &[T],
    p1: &[T],
) -> T {
    let d = grid.dims();
    let shape = grid.shape();
    let strides = grid.strides();
    let inv_h = T::one() / grid.spacing();
    let mut idx = vec![0usize; d];
    let mut total = T::zero();
    for i in 0..grid.len() {
        let mut acc = T::zero();
        for v in 0..d {
            let up = m[i * d + v];
            let down = if idx[v] > 0 { m[(i - strides[v]) * d + v] } else { T::zero() };
            acc += up - down;
        }
        total += (acc * inv_h + p1[i] - p0[i]).abs();
        advance_multi_index(shape, &mut idx);
    }
    total / T::from_usize(grid.len()).unwrap()
}

/// Discrete divergence `div(m)_i = (1/dx) sum_v (m_{i+e_v/2} - m_{i-e_v/2})`
/// with zero inflow across the boundary.
pub fn divergence<T: Scalar>(m: &FluxField<T>) -> Vec<T> {
    let mut out = vec![T::zero(); m.grid().len()];
    divergence_into(m.grid(), m.values(), &mut out);
    out
}

/// Forward-difference gradient `(phi_{i+e_v} - phi_i)/dx` per face, laid out
/// like [`FluxField`] values; boundary faces (where the flux is pinned to
/// zero) get gradient 0 so that divergence and gradient stay exact negative
/// adjoints.
pub fn gradient<T: Scalar>(phi: &DualPotential<T>) -> Vec<T> {
    let mut out = vec![T::zero(); phi.grid().len() * phi.grid().dims()];
    gradient_into(phi.grid(), phi.values(), &mut out);
    out
}

/// Stopping quantity `(1/N) sum_i |div(m)_i + p1_i - p0_i|`.
pub fn total_divergence_residual<T: Scalar>(
    m: &FluxField<T>,
    p0: &DensityField<T>,
    p1: &DensityField<T>,
) -> Result<T> {
    if !same_grid(m.grid(), p0.grid()) || !same_grid(m.grid(), p1.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(mean_residual_raw(m.grid(), m.values(), p0.mass(), p1.mass()))
}
