use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::SignalSet;
use crate::error::{ClaError, Result};
use crate::panel::{EntityId, TargetSeries, TimeId};

/// Default rebalance cadence, in periods.
pub const DEFAULT_REBALANCE_EVERY: usize = 6;

/// Positions set at a rebalance date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Holdings {
    pub time: TimeId,
    pub long: Vec<(EntityId, f64)>,
    pub short: Vec<(EntityId, f64)>,
}

impl Holdings {
    fn from_signals(s: &SignalSet) -> Self {
        let leg = |ids: &[EntityId], sign: f64| {
            let w = sign / ids.len() as f64;
            ids.iter().map(|e| (e.clone(), w)).collect()
        };
        Self { time: s.time.clone(), long: leg(&s.buys, 1.0), short: leg(&s.sells, -1.0) }
    }

    pub fn net_weight(&self) -> f64 {
        self.long.iter().chain(&self.short).map(|(_, w)| w).sum()
    }
}

/// An entity removed from a leg because its return was missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropEvent {
    pub time: TimeId,
    pub entity: EntityId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSeries {
    pub rebalances: Vec<Holdings>,
    /// One return per simulated period.
    pub returns: Vec<(TimeId, f64)>,
    pub drops: Vec<DropEvent>,
}

impl PortfolioSeries {
    pub fn period_returns(&self) -> Vec<f64> {
        self.returns.iter().map(|(_, r)| *r).collect()
    }
}

/// Equal-weighted long/short simulation. `times` are the periods in order;
/// the portfolio is rebuilt from `signals` every `rebalance_every` periods
/// starting with the first. `realized` holds each entity's return over the
/// period that starts at each time.
pub fn simulate(
    times: &[TimeId],
    signals: &BTreeMap<TimeId, SignalSet>,
    realized: &TargetSeries,
    rebalance_every: usize,
) -> Result<PortfolioSeries> {
    if rebalance_every == 0 {
        return Err(ClaError::Precondition("rebalance cadence must be positive".into()));
    }
    let mut out = PortfolioSeries { rebalances: Vec::new(), returns: Vec::new(), drops: Vec::new() };
    let mut long: Vec<EntityId> = Vec::new();
    let mut short: Vec<EntityId> = Vec::new();
    for (i, t) in times.iter().enumerate() {
        if i % rebalance_every == 0 {
            let s =
                signals.get(t).ok_or_else(|| ClaError::Precondition(format!("no signals at rebalance date `{t}`")))?;
            let h = Holdings::from_signals(s);
            long = s.buys.clone();
            short = s.sells.clone();
            out.rebalances.push(h);
        }
        let mut leg_return = |leg: &mut Vec<EntityId>, sign: f64| -> f64 {
            leg.retain(|e| {
                let ok = realized.get(t, e).is_some();
                if !ok {
                    warn!("no realized return for `{e}` at `{t}`; dropping it from its leg");
                    out.drops.push(DropEvent { time: t.clone(), entity: e.clone() });
                }
                ok
            });
            if leg.is_empty() {
                return 0.0;
            }
            let w = sign / leg.len() as f64;
            leg.iter().map(|e| w * realized.get(t, e).expect("retained")).sum()
        };
        let r = leg_return(&mut long, 1.0) + leg_return(&mut short, -1.0);
        out.returns.push((t.clone(), r));
    }
    Ok(out)
}
