//! Dynamic time warping with absolute-difference local cost and the
//! symmetric step pattern {match, insertion, deletion}.

use crate::error::{ClaError, Result};

/// DTW distance between two sequences, unconstrained.
pub fn dtw_kernel(a: &[f64], b: &[f64]) -> Result<f64> {
    dtw_kernel_banded(a, b, None)
}

/// DTW distance restricted to a Sakoe-Chiba band of half-width `band`
/// (widened to `|len(a) - len(b)|` when narrower, so a path always exists).
pub fn dtw_kernel_banded(a: &[f64], b: &[f64], band: Option<usize>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(ClaError::EmptySequence);
    }
    Ok(dtw_unchecked(a, b, band))
}

pub(crate) fn dtw_unchecked(a: &[f64], b: &[f64], band: Option<usize>) -> f64 {
    let (n, m) = (a.len(), b.len());
    let w = band.map_or(usize::MAX, |w| w.max(n.abs_diff(m)));
    // two rolling rows of the cost matrix, index 0 is the infinite border
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let lo = if w == usize::MAX { 1 } else { i.saturating_sub(w).max(1) };
        let hi = if w == usize::MAX { m } else { (i + w).min(m) };
        for j in lo..=hi {
            let cost = (a[i - 1] - b[j - 1]).abs();
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Z-normalizes a sequence (mean 0, population sd 1). Constant sequences map to zeros.
pub fn z_normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / sd).collect()
}
