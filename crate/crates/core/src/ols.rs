//! Ordinary least squares via a rank-revealing SVD.

use nalgebra::{DMatrix, DVector};

use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;

/// Relative singular-value cutoff below which a design is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares coefficients of `y` on `[1, x]`: returns `(intercept, slopes)`.
pub fn fit_with_intercept(x: &FeatureMatrix, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = x.nrows();
    let k = x.ncols();
    if n != y.len() {
        return Err(ClaError::Malformed(format!("{n} rows but {} targets", y.len())));
    }
    if n < k + 1 {
        return Err(ClaError::SingularDesign(format!("{n} observations cannot identify {} coefficients", k + 1)));
    }
    let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let beta = solve(design, DVector::from_column_slice(y))?;
    Ok((beta[0], beta.iter().skip(1).copied().collect()))
}

fn solve(design: DMatrix<f64>, y: DVector<f64>) -> Result<DVector<f64>> {
    let p = design.ncols();
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * RANK_TOL;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if smax == 0.0 || rank < p {
        return Err(ClaError::SingularDesign(format!("rank {rank} < {p} columns")));
    }
    svd.solve(&y, cutoff).map_err(|e| ClaError::SingularDesign(e.to_string()))
}
