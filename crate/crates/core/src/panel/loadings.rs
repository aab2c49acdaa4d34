//! Rolling two-factor loadings: `r_i = alpha + beta_mkt x_mkt + beta_val x_val + e`
//! estimated by OLS over a trailing window for each entity and time.

use std::collections::BTreeMap;

use log::debug;

use super::{CrossSection, EntityId, Panel, TimeId};
use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;
use crate::ols::fit_with_intercept;

/// 36 months.
pub const DEFAULT_LOADING_WINDOW: usize = 36;

pub const LOADING_FEATURES: [&str; 3] = ["alpha", "beta_mkt", "beta_val"];

/// Estimates `(alpha, beta_mkt, beta_val)` per entity at every time with a
/// complete trailing window.
///
/// All series are aligned with `times`; `None` marks a missing stock return.
/// An entity whose window is incomplete or whose design is singular is left
/// out of that cross-section. Times at which no entity qualifies produce no
/// cross-section.
pub fn rolling_factor_loadings(
    times: &[TimeId],
    stock_excess_returns: &BTreeMap<EntityId, Vec<Option<f64>>>,
    market_excess: &[f64],
    value_relative: &[f64],
    window: usize,
) -> Result<Panel> {
    let n = times.len();
    if market_excess.len() != n || value_relative.len() != n {
        return Err(ClaError::Malformed("factor series must align with times".into()));
    }
    if let Some((e, _)) = stock_excess_returns.iter().find(|(_, s)| s.len() != n) {
        return Err(ClaError::Malformed(format!("return series for `{e}` does not align with times")));
    }
    if window < 3 {
        return Err(ClaError::Precondition("loading window must cover at least 3 observations".into()));
    }

    let mut sections = Vec::new();
    for t in window.saturating_sub(1)..n {
        let lo = t + 1 - window;
        let mut design = FeatureMatrix::with_cols(2);
        for s in lo..=t {
            design.push_row(&[market_excess[s], value_relative[s]])?;
        }
        let mut entities = Vec::new();
        let mut values = FeatureMatrix::with_cols(3);
        for (e, series) in stock_excess_returns {
            let Some(y) = series[lo..=t].iter().copied().collect::<Option<Vec<f64>>>() else {
                continue;
            };
            match fit_with_intercept(&design, &y) {
                Ok((alpha, b)) => {
                    values.push_row(&[alpha, b[0], b[1]])?;
                    entities.push(e.clone());
                }
                Err(ClaError::SingularDesign(why)) => {
                    debug!("loadings for `{e}` at `{}` skipped: {why}", times[t]);
                }
                Err(other) => return Err(other),
            }
        }
        if !entities.is_empty() {
            sections.push(CrossSection { time: times[t].clone(), entities, values });
        }
    }
    Panel::new(LOADING_FEATURES.iter().map(|s| s.to_string()).collect(), sections)
}
