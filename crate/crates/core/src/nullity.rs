//! Rank decisions from singular values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RTOL: f64 = 1e-10;

/// Absolute threshold `1e−8·√N` for an operator discretized on `N` nodes.
pub fn default_atol(grid_len: usize) -> f64 {
    1e-8 * (grid_len as f64).sqrt()
}

/// Singular values and the resulting kernel dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullityOutcome {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub nullity: usize,
    pub tolerance_used: f64,
}

impl NullityOutcome {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }
}

/// Golub-Kahan SVD with singular values in descending order.
fn svd(
    matrix: &DMatrix<f64>,
    vectors: bool,
) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let mut svd = matrix
        .clone()
        .try_svd(false, vectors, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    svd.sort_by_singular_values();
    Ok(svd)
}

fn check_square(matrix: &DMatrix<f64>) -> Result<()> {
    if !matrix.is_square() || matrix.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "nullity needs a non-empty square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Descending singular values.
pub fn singular_values(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(svd(matrix, false)?
        .singular_values
        .iter()
        .copied()
        .collect())
}

/// `#{σ_i < max(atol, rtol·σ_max)}`.
pub fn count_below(singular_values: &[f64], atol: f64, rtol: f64) -> (usize, f64) {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let tol = atol.max(rtol * smax);
    (singular_values.iter().filter(|&&s| s < tol).count(), tol)
}

pub fn numerical_nullity(matrix: &DMatrix<f64>, atol: f64, rtol: f64) -> Result<NullityOutcome> {
    check_square(matrix)?;
    let singular_values = singular_values(matrix)?;
    let (nullity, tolerance_used) = count_below(&singular_values, atol, rtol);
    Ok(NullityOutcome {
        singular_values,
        nullity,
        tolerance_used,
    })
}

/// Right singular vectors of the `count` smallest singular values.
pub fn null_space(matrix: &DMatrix<f64>, count: usize) -> Result<Vec<DVector<f64>>> {
    check_square(matrix)?;
    let svd = svd(matrix, true)?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD without right vectors".into()))?;
    let n = matrix.ncols();
    Ok((n - count.min(n)..n)
        .map(|j| v_t.row(j).transpose())
        .collect())
}

/// Outcome of the grid-doubling comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedNullity {
    pub nullity: usize,
    /// Small singular values at `N`, ascending.
    pub coarse_tail: Vec<f64>,
    /// The matching values at `2N`.
    pub fine_tail: Vec<f64>,
    /// Per tail index: counted as kernel.
    pub kernel_flags: Vec<bool>,
}

/// Largest ratio `σ(N)/σ(2N)` that still counts as a plateau; a kernel
/// direction resolved at second order shrinks by about four per doubling.
pub const PLATEAU_RATIO: f64 = 2.5;
/// Only singular values this small relative to `σ_max` may be reclassified.
pub const CANDIDATE_RTOL: f64 = 1e-3;

/// Compare the ascending spectra of the same operator discretized at `N`
/// and `2N`. A singular value counts as kernel if it is below the plain
/// threshold at both resolutions, or if it is small and shrinks by more
/// than [`PLATEAU_RATIO`] under doubling (discretization error of a true
/// kernel direction). Values that plateau are genuine nonzero spectrum.
pub fn refined_nullity(
    coarse: &NullityOutcome,
    fine: &NullityOutcome,
    rtol: f64,
) -> RefinedNullity {
    let asc = |o: &NullityOutcome| {
        o.singular_values
            .iter()
            .rev()
            .copied()
            .collect::<Vec<f64>>()
    };
    let (c, f) = (asc(coarse), asc(fine));
    let candidates = c
        .iter()
        .take_while(|&&s| s <= CANDIDATE_RTOL * coarse.sigma_max() || s < coarse.tolerance_used)
        .count()
        .max(coarse.nullity);
    let len = candidates.min(f.len());
    let mut flags = Vec::with_capacity(len);
    for i in 0..len {
        let plain =
            c[i] < coarse.tolerance_used && f[i] < fine.tolerance_used.max(rtol * fine.sigma_max());
        let shrinking = f[i] * PLATEAU_RATIO <= c[i];
        flags.push(plain || shrinking);
    }
    // kernel directions are the smallest ones; stop at the first gap
    let nullity = flags.iter().take_while(|&&b| b).count();
    RefinedNullity {
        nullity,
        coarse_tail: c[..len].to_vec(),
        fine_tail: f[..len].to_vec(),
        kernel_flags: flags,
    }
}
