use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::panel::{EntityId, TimeId};

/// Top-decile buys and bottom-decile sells at one time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSet {
    pub time: TimeId,
    pub buys: Vec<EntityId>,
    pub sells: Vec<EntityId>,
}

/// Ranks forecasts and takes `floor(n / 10)` entities from each end. Ties
/// resolve toward the lower entity id on both legs; sells are picked from
/// the entities not already bought.
pub fn decile_signals(time: &TimeId, forecasts: &[(EntityId, f64)]) -> Result<SignalSet> {
    let n = forecasts.len();
    if n < 10 {
        return Err(ClaError::TooFewEntities { needed: 10, found: n });
    }
    if let Some((e, v)) = forecasts.iter().find(|(_, v)| !v.is_finite()) {
        return Err(ClaError::NonFinite(format!("forecast {v} for entity `{e}`")));
    }
    let q = n / 10;
    let mut by_desc: Vec<&(EntityId, f64)> = forecasts.iter().collect();
    by_desc.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut buys: Vec<EntityId> = by_desc[..q].iter().map(|(e, _)| e.clone()).collect();
    let mut by_asc: Vec<&(EntityId, f64)> = forecasts.iter().filter(|(e, _)| !buys.contains(e)).collect();
    by_asc.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut sells: Vec<EntityId> = by_asc[..q].iter().map(|(e, _)| e.clone()).collect();
    buys.sort();
    sells.sort();
    Ok(SignalSet { time: time.clone(), buys, sells })
}
