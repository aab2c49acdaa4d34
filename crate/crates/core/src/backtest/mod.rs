//! Decile long/short backtest and performance metrics.

mod metrics;
mod portfolio;
mod signals;

use std::io::{Read, Write};

use crate::error::{ClaError, Result};
use crate::panel::TimeId;

pub use metrics::{
    annualized_total_return, compute_metrics, sample_sd, t_test, MetricsConfig, MetricsReport, RelativeReturn,
};
pub use portfolio::{simulate, DropEvent, Holdings, PortfolioSeries, DEFAULT_REBALANCE_EVERY};
pub use signals::{decile_signals, SignalSet};

/// One row of the per-period returns file.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReturnRow {
    pub time: TimeId,
    pub strategy_return: f64,
    pub baseline_return: f64,
}

pub fn write_returns_csv<W: Write>(rows: &[ReturnRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "strategy_return", "baseline_return"])?;
    for r in rows {
        w.write_record([r.time.0.clone(), r.strategy_return.to_string(), r.baseline_return.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_returns_csv<R: Read>(reader: R) -> Result<Vec<ReturnRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ReturnRow>, _>>()?;
    if rows.iter().any(|x| !x.strategy_return.is_finite() || !x.baseline_return.is_finite()) {
        return Err(ClaError::NonFinite("return row".into()));
    }
    Ok(rows)
}
