//! Exact Earth Mover's Distance for small rational-mass measures, used as
//! ground truth when verifying the lattice solver.
//!
//! Masses are integers over a common denominator `K`, so each measure splits
//! into `K` unit atoms of mass `1/K` and an optimal transport plan exists at
//! a permutation (an extreme point of the Birkhoff polytope). The K-by-K
//! assignment problem is then solved exactly by the Hungarian method in
//! O(K^3). A complexity guard caps `K` at [`MAX_UNITS`].

use crate::lattice::DensityField;
use crate::solver::Metric;
use crate::{Error, Result, Scalar};

/// Upper bound on the unit-atom count accepted by [`exact_emd`].
pub const MAX_UNITS: u32 = 256;

/// A measure with finitely many atoms whose masses are `numerator /
/// denominator` with a shared denominator; masses sum to exactly 1 in
/// integer arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<T> {
    denominator: u32,
    atoms: Vec<(Vec<T>, u32)>,
}

impl<T: Scalar> AtomicMeasure<T> {
    /// Build a measure from `(position, numerator)` atoms. Numerators must be
    /// positive and sum to `denominator`; atoms at identical positions merge.
    pub fn new(denominator: u32, atoms: Vec<(Vec<T>, u32)>) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::InvalidMeasure("denominator must be positive".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("measure needs at least one atom".into()));
        }
        let dims = atoms[0].0.len();
        let mut merged: Vec<(Vec<T>, u32)> = Vec::with_capacity(atoms.len());
        let mut total: u64 = 0;
        for (position, numerator) in atoms {
            if position.len() != dims {
                return Err(Error::DimensionMismatch { left: position.len(), right: dims });
            }
            if position.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("atom position".into()));
            }
            if numerator == 0 {
                return Err(Error::InvalidMeasure("atom mass must be positive".into()));
            }
            total += u64::from(numerator);
            match merged.iter_mut().find(|(p, _)| p == &position) {
                Some((_, w)) => *w += numerator,
                None => merged.push((position, numerator)),
            }
        }
        if total != u64::from(denominator) {
            return Err(Error::InvalidMeasure(format!(
                "atom masses sum to {total}/{denominator}, expected 1"
            )));
        }
        Ok(Self { denominator, atoms: merged })
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn dims(&self) -> usize {
        self.atoms[0].0.len()
    }

    /// Merged `(position, numerator)` atoms.
    pub fn atoms(&self) -> &[(Vec<T>, u32)] {
        &self.atoms
    }
}

/// Manhattan or Euclidean point-to-point distance.
pub fn ground_distance<T: Scalar>(x: &[T], y: &[T], metric: Metric) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
    }
    Ok(match metric {
        Metric::L1 => x.iter().zip(y).map(|(&a, &b)| (a - b).abs()).sum(),
        Metric::L2 => x
            .iter()
            .zip(y)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt(),
    })
}

/// Hungarian method (shortest augmenting paths with potentials) on a square
/// cost matrix `cost[row * n + col]`; returns the minimal assignment cost.
fn min_cost_assignment<T: Scalar>(cost: &[T], n: usize) -> T {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return T::zero();
    }
    let inf = T::infinity();
    // 1-based arrays; column 0 is the virtual root of each augmenting search
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // unwind the augmenting path
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = T::zero();
    for j in 1..=n {
        total += cost[(matched_row[j] - 1) * n + (j - 1)];
    }
    total
}

/// Exact EMD between two rational measures sharing a denominator `K <=`
/// [`MAX_UNITS`]: splits both into `K` unit atoms and solves the assignment
/// problem, which is exact because uniform unit masses admit an optimal plan
/// at a permutation.
pub fn exact_emd<T: Scalar>(
    mu0: &AtomicMeasure<T>,
    mu1: &AtomicMeasure<T>,
    metric: Metric,
) -> Result<T> {
    if mu0.denominator != mu1.denominator {
        return Err(Error::MismatchedDenominators {
            left: mu0.denominator,
            right: mu1.denominator,
        });
    }
    if mu0.dims() != mu1.dims() {
        return Err(Error::DimensionMismatch { left: mu0.dims(), right: mu1.dims() });
    }
    let k = mu0.denominator;
    if k > MAX_UNITS {
        return Err(Error::InvalidMeasure(format!(
            "denominator {k} exceeds the assignment guard {MAX_UNITS}"
        )));
    }
    let expand = |m: &AtomicMeasure<T>| -> Vec<usize> {
        let mut units = Vec::with_capacity(k as usize);
        for (atom_idx, (_, numerator)) in m.atoms.iter().enumerate() {
            units.extend(std::iter::repeat_n(atom_idx, *numerator as usize));
        }
        units
    };
    let units0 = expand(mu0);
    let units1 = expand(mu1);
    let n = k as usize;
    let mut cost = vec![T::zero(); n * n];
    for (a, &i) in units0.iter().enumerate() {
        for (b, &j) in units1.iter().enumerate() {
            cost[a * n + b] = ground_distance(&mu0.atoms[i].0, &mu1.atoms[j].0, metric)?;
        }
    }
    Ok(min_cost_assignment(&cost, n) / T::from_u32(k).unwrap())
}

/// Convert a lattice density whose masses are multiples of `1/denominator`
/// into an atomic measure positioned at the vertex coordinates.
pub fn measure_from_density<T: Scalar>(
    p: &DensityField<T>,
    denominator: u32,
) -> Result<AtomicMeasure<T>> {
    if denominator == 0 {
        return Err(Error::InvalidMeasure("denominator must be positive".into()));
    }
    let k = T::from_u32(denominator).unwrap();
    let tol = crate::cast::<T>(1e-9);
    let mut atoms = Vec::new();
    let mut total: u64 = 0;
    for (i, &mass) in p.mass().iter().enumerate() {
        let scaled = mass * k;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > tol {
            return Err(Error::NotRepresentable {
                denominator,
                detail: format!("mass {mass} at vertex {i} is not a multiple of 1/{denominator}"),
            });
        }
        let numerator = rounded.to_u32().ok_or_else(|| Error::NotRepresentable {
            denominator,
            detail: format!("mass {mass} at vertex {i} out of range"),
        })?;
        if numerator > 0 {
            atoms.push((p.grid().coordinate(i), numerator));
            total += u64::from(numerator);
        }
    }
    if total != u64::from(denominator) {
        return Err(Error::NotRepresentable {
            denominator,
            detail: format!("masses sum to {total}/{denominator}, expected 1"),
        });
    }
    AtomicMeasure::new(denominator, atoms)
}
