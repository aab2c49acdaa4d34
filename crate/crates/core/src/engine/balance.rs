//! Similarity-weighted balancing of participant forecasts.

use crate::error::{ClaError, Result};

/// Maps dissimilarities to mixture weights: `1 - D_m / sum(D)`, rescaled to
/// sum to one. One participant gets weight one; all-zero dissimilarities
/// give equal weights.
pub fn balance_weights(dissimilarities: &[f64]) -> Result<Vec<f64>> {
    let m = dissimilarities.len();
    if m == 0 {
        return Err(ClaError::Precondition("no participants to balance".into()));
    }
    if let Some(d) = dissimilarities.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(ClaError::NonFinite(format!("dissimilarity {d}")));
    }
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let s: f64 = dissimilarities.iter().sum();
    if s == 0.0 {
        return Ok(vec![1.0 / m as f64; m]);
    }
    let denom = s * (m - 1) as f64;
    Ok(dissimilarities.iter().map(|d| (s - d) / denom).collect())
}

/// `sum_m w_m * f_m` elementwise. A single participant's forecast is
/// returned unchanged.
pub fn mix_forecasts(weights: &[f64], forecasts: &[&[f64]]) -> Result<Vec<f64>> {
    if weights.len() != forecasts.len() || forecasts.is_empty() {
        return Err(ClaError::Precondition("one weight per forecast required".into()));
    }
    let n = forecasts[0].len();
    if let Some(f) = forecasts.iter().find(|f| f.len() != n) {
        return Err(ClaError::WidthMismatch { expected: n, found: f.len() });
    }
    if forecasts.len() == 1 {
        return Ok(forecasts[0].to_vec());
    }
    let mut out = vec![0.0; n];
    for (w, f) in weights.iter().zip(forecasts) {
        for (o, v) in out.iter_mut().zip(f.iter()) {
            *o += w * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_participants() {
        let w = balance_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(w, vec![0.75, 0.25]);
        assert_eq!(mix_forecasts(&w, &[&[2.0], &[4.0]]).unwrap(), vec![2.5]);
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(balance_weights(&[7.0]).unwrap(), vec![1.0]);
        assert_eq!(balance_weights(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert!(balance_weights(&[]).is_err());
        assert!(balance_weights(&[-1.0, 1.0]).is_err());
    }

    #[test]
    fn single_forecast_is_untouched() {
        let f = [-0.0, 1.0];
        let out = mix_forecasts(&[1.0], &[&f]).unwrap();
        assert_eq!(out[0].to_bits(), (-0.0f64).to_bits());
    }
}
