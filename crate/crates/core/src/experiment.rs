//! One experiment cell: run the engine over a panel, backtest its forecasts
//! against the unaugmented base learner and collect the artifacts.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::backtest::{
    compute_metrics, decile_signals, simulate, MetricsConfig, MetricsReport, PortfolioSeries, ReturnRow, SignalSet,
    DEFAULT_REBALANCE_EVERY,
};
use crate::engine::{mean_abs_error, ClaEngine, EngineConfig, MemoryStore, StepOutput, StepTrace, ThresholdMode};
use crate::error::{ClaError, Result};
use crate::learners::Learner;
use crate::panel::{EntityId, Panel, TargetSeries, TimeId};

/// Everything an engine run produces.
#[derive(Clone, Debug)]
pub struct EngineRun {
    pub outputs: Vec<StepOutput>,
    pub memory: MemoryStore,
    pub thresholds: Vec<Option<f64>>,
}

impl EngineRun {
    pub fn traces(&self) -> Vec<StepTrace> {
        self.outputs.iter().map(|o| o.trace.clone()).collect()
    }

    pub fn forecast_rows(&self) -> Vec<ForecastRow> {
        forecast_rows(&self.outputs)
    }
}

pub fn run_engine(
    panel: &Panel,
    targets: &TargetSeries,
    learner: &dyn Learner,
    config: EngineConfig,
) -> Result<EngineRun> {
    let mut engine = ClaEngine::new(panel, targets, learner, config)?;
    let outputs = engine.run()?;
    Ok(EngineRun { outputs, memory: engine.memory_store()?, thresholds: engine.thresholds_used().to_vec() })
}

/// The same engine with the gate disabled: the base learner alone.
pub fn run_baseline(
    panel: &Panel,
    targets: &TargetSeries,
    learner: &dyn Learner,
    config: &EngineConfig,
) -> Result<EngineRun> {
    let config = EngineConfig { threshold: ThresholdMode::Disabled, ..config.clone() };
    run_engine(panel, targets, learner, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub time: TimeId,
    pub entity: EntityId,
    pub forecast: f64,
}

pub fn forecast_rows(outputs: &[StepOutput]) -> Vec<ForecastRow> {
    outputs
        .iter()
        .flat_map(|o| {
            o.entities.iter().zip(&o.forecast).map(|(e, f)| ForecastRow {
                time: o.time.clone(),
                entity: e.clone(),
                forecast: *f,
            })
        })
        .collect()
}

pub fn write_forecasts_csv<W: Write>(rows: &[ForecastRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "entity", "forecast"])?;
    for r in rows {
        w.write_record([r.time.0.clone(), r.entity.0.clone(), r.forecast.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_forecasts_csv<R: Read>(reader: R) -> Result<Vec<ForecastRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<ForecastRow>, _>>()?)
}

/// Mean absolute forecast error per step, `None` where no target is known.
pub fn step_errors(outputs: &[StepOutput], targets: &TargetSeries) -> Vec<Option<f64>> {
    outputs
        .iter()
        .map(|o| {
            let (mut f, mut y) = (Vec::new(), Vec::new());
            for (e, v) in o.entities.iter().zip(&o.forecast) {
                if let Some(t) = targets.get(&o.time, e) {
                    f.push(*v);
                    y.push(t);
                }
            }
            (!f.is_empty()).then(|| mean_abs_error(&f, &y))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub rebalance_every: usize,
    #[serde(flatten)]
    pub metrics: MetricsConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { rebalance_every: DEFAULT_REBALANCE_EVERY, metrics: MetricsConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacktestResult {
    pub strategy: PortfolioSeries,
    pub baseline: PortfolioSeries,
    pub returns: Vec<ReturnRow>,
    pub metrics: MetricsReport,
}

fn signal_stream(outputs: &[StepOutput], times: &[TimeId]) -> Result<BTreeMap<TimeId, SignalSet>> {
    let mut out = BTreeMap::new();
    for o in outputs.iter().filter(|o| times.contains(&o.time)) {
        let pairs: Vec<(EntityId, f64)> = o.entities.iter().cloned().zip(o.forecast.iter().copied()).collect();
        out.insert(o.time.clone(), decile_signals(&o.time, &pairs)?);
    }
    Ok(out)
}

/// Backtests two forecast streams over the steps whose realized returns
/// are known and compares the strategy with the baseline.
pub fn backtest(
    strategy: &[StepOutput],
    baseline: &[StepOutput],
    realized: &TargetSeries,
    config: &BacktestConfig,
) -> Result<BacktestResult> {
    let times: Vec<TimeId> =
        strategy.iter().map(|o| o.time.clone()).filter(|t| realized.at(t).is_some_and(|m| !m.is_empty())).collect();
    let base_times: Vec<TimeId> = baseline.iter().map(|o| o.time.clone()).collect();
    if let Some(t) = times.iter().find(|t| !base_times.contains(t)) {
        return Err(ClaError::Precondition(format!("baseline has no forecast at `{t}`")));
    }
    let s = simulate(&times, &signal_stream(strategy, &times)?, realized, config.rebalance_every)?;
    let b = simulate(&times, &signal_stream(baseline, &times)?, realized, config.rebalance_every)?;
    let (sr, br) = (s.period_returns(), b.period_returns());
    let metrics = compute_metrics(&sr, &br, &config.metrics)?;
    let returns = times
        .into_iter()
        .zip(sr.iter().zip(&br))
        .map(|(time, (s, b))| ReturnRow { time, strategy_return: *s, baseline_return: *b })
        .collect();
    Ok(BacktestResult { strategy: s, baseline: b, returns, metrics })
}
