//! Ordinary least squares through the normal equations.

use crate::data::{FitResult, Method};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};

/// Relative pivot floor below which `ZᵀZ` is treated as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Least squares fit of `target` on the columns of `z` (no intercept).
pub fn ols_fit(z: &Matrix, target: &[f64]) -> Result<FitResult> {
    let (n, p) = (z.rows(), z.cols());
    if target.len() != n {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: n,
            found: target.len(),
        });
    }
    if p > n {
        return Err(Error::SingularDesign {
            pivot_ratio: 0.0,
            n,
            p,
        });
    }
    if p == 0 {
        return Ok(FitResult::from_coef(z, target, Vec::new(), Method::Ols, Vec::new(), true, 0));
    }
    let factor = cholesky(&z.gram()).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularDesign {
            pivot_ratio: 0.0,
            n,
            p,
        },
        other => other,
    })?;
    // Pivots of the factorization are the squared diagonal of L.
    let (lo, hi) = factor.pivot_range();
    let ratio = (lo * lo) / (hi * hi);
    if ratio <= PIVOT_TOLERANCE {
        return Err(Error::SingularDesign {
            pivot_ratio: ratio,
            n,
            p,
        });
    }
    let coef = factor.solve(&z.t_mul_vec(target));
    Ok(FitResult::from_coef(z, target, coef, Method::Ols, Vec::new(), true, 1))
}
