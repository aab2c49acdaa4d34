use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{ClaError, Result};

/// How the relative return against the baseline is annualized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeReturn {
    /// Strategy TR minus baseline TR, so that `TR - RR` is the baseline's TR.
    #[default]
    TotalReturnDifference,
    /// Mean per-period difference times periods per year.
    ArithmeticMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub periods_per_year: f64,
    #[serde(default)]
    pub relative: RelativeReturn,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { periods_per_year: 12.0, relative: RelativeReturn::default() }
    }
}

/// Annualized performance of a strategy and of its difference to a baseline.
/// Undefined ratios are `None`, with the reason in `notes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub periods: usize,
    pub tr: f64,
    pub sd: f64,
    pub sharpe: Option<f64>,
    pub sharpe_t: Option<f64>,
    pub sharpe_p: Option<f64>,
    pub baseline_tr: f64,
    pub rr: f64,
    pub rr_sd: f64,
    pub info_ratio: Option<f64>,
    pub ir_t: Option<f64>,
    pub ir_p: Option<f64>,
    pub notes: Vec<String>,
}

/// Compounded return annualized geometrically.
pub fn annualized_total_return(returns: &[f64], periods_per_year: f64) -> f64 {
    let growth: f64 = returns.iter().map(|r| 1.0 + r).product();
    growth.powf(periods_per_year / returns.len() as f64) - 1.0
}

/// Sample standard deviation; exactly zero for a constant series.
pub fn sample_sd(x: &[f64]) -> f64 {
    if x.iter().all(|v| *v == x[0]) {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// One-sample t statistic against zero and its two-sided p-value.
pub fn t_test(x: &[f64]) -> Option<(f64, f64)> {
    let sd = sample_sd(x);
    if sd == 0.0 || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let t = (x.iter().sum::<f64>() / n) / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).ok()?;
    Some((t, 2.0 * (1.0 - dist.cdf(t.abs()))))
}

pub fn compute_metrics(strategy: &[f64], baseline: &[f64], config: &MetricsConfig) -> Result<MetricsReport> {
    let n = strategy.len();
    if n < 2 {
        return Err(ClaError::Precondition("metrics need at least two periods".into()));
    }
    if baseline.len() != n {
        return Err(ClaError::WidthMismatch { expected: n, found: baseline.len() });
    }
    if !(config.periods_per_year.is_finite() && config.periods_per_year > 0.0) {
        return Err(ClaError::Precondition("periods per year must be positive".into()));
    }
    if strategy.iter().chain(baseline).any(|r| !r.is_finite() || *r <= -1.0) {
        return Err(ClaError::NonFinite("period returns must be finite and above -100%".into()));
    }
    let ppy = config.periods_per_year;
    let mut notes = Vec::new();

    let tr = annualized_total_return(strategy, ppy);
    let sd = sample_sd(strategy) * ppy.sqrt();
    let sharpe = (sd > 0.0).then(|| tr / sd);
    if sharpe.is_none() {
        notes.push("sharpe undefined: zero return deviation".to_string());
    }
    let st = t_test(strategy);

    let diff: Vec<f64> = strategy.iter().zip(baseline).map(|(s, b)| s - b).collect();
    let baseline_tr = annualized_total_return(baseline, ppy);
    let rr = match config.relative {
        RelativeReturn::TotalReturnDifference => tr - baseline_tr,
        RelativeReturn::ArithmeticMean => diff.iter().sum::<f64>() / n as f64 * ppy,
    };
    let rr_sd = sample_sd(&diff) * ppy.sqrt();
    let info_ratio = (rr_sd > 0.0).then(|| rr / rr_sd);
    if info_ratio.is_none() {
        notes.push("information ratio undefined: zero relative deviation".to_string());
    }
    let it = t_test(&diff);

    Ok(MetricsReport {
        periods: n,
        tr,
        sd,
        sharpe,
        sharpe_t: st.map(|x| x.0),
        sharpe_p: st.map(|x| x.1),
        baseline_tr,
        rr,
        rr_sd,
        info_ratio,
        ir_t: it.map(|x| x.0),
        ir_p: it.map(|x| x.1),
        notes,
    })
}
