//! Continual-learning augmentation around a base learner.
//!
//! Each step runs a backward pass (observe the base learner's newly
//! observable error, append a memory if it spikes above the critical
//! threshold, relearn the threshold), retrains the base learner on the
//! current window, then a forward pass that mixes the base learner and all
//! recalled memories by similarity to the current cross-section.
//!
//! The base learner is refit from scratch at every step, so its parameters
//! and forecasts do not depend on gate decisions. Scores and predictions are
//! cached per (source step, target step) pair, which makes threshold replay
//! a cheap re-run of the gate bookkeeping.

mod balance;
mod gate;
mod memory;
mod trace;

use std::collections::HashMap;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::learners::{AeConfig, Learner, ParamSnapshot};
use crate::matrix::FeatureMatrix;
use crate::panel::{
    history_window, sequences_at, sliding_window_at, EntityId, Panel, TargetSeries, TimeId, DEFAULT_SLIDING_WIDTH,
};
use crate::similarity::{mix_seed, ContextRepresentation, SamplerConfig, Scorer, Strategy};

pub use balance::{balance_weights, mix_forecasts};
pub use gate::{jcrit_grid, learn_jcrit, mean_abs_error, select_candidate, GateState, DEFAULT_GRID_SIZE};
pub use memory::{MemoryColumn, MemoryStore};
pub use trace::{
    read_trace_jsonl, read_triangle_csv, triangle_rows, write_trace_jsonl, write_triangle_csv, ForecastSummary,
    ParticipantTrace, StepTrace, TriangleRow,
};

use memory::{Slot, Slots};

/// How the remember threshold is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Grid search over the error range, replaying the run per candidate.
    Learned,
    Fixed {
        value: f64,
    },
    /// Never remember.
    Disabled,
    /// One threshold per engine step, `None` meaning never remember.
    Recorded {
        thresholds: Vec<Option<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub strategy: Strategy,
    pub sampler: SamplerConfig,
    pub dtw_band: Option<usize>,
    /// Autoencoder settings for the AE strategies; defaults to hidden width `K`.
    pub autoencoder: Option<AeConfig>,
    pub threshold: ThresholdMode,
    pub grid_size: usize,
    pub relearn_every: usize,
    pub capacity: Option<usize>,
    pub top_k: Option<usize>,
    /// Cross-sections in the sliding training window.
    pub window: usize,
    /// History length for sequential learners.
    pub seq_len: usize,
    /// Cap on cross-sections used by sequential learners.
    pub max_history: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Euclidean,
            sampler: SamplerConfig::default(),
            dtw_band: None,
            autoencoder: None,
            threshold: ThresholdMode::Learned,
            grid_size: DEFAULT_GRID_SIZE,
            relearn_every: 1,
            capacity: None,
            top_k: None,
            window: DEFAULT_SLIDING_WIDTH,
            seq_len: 4,
            max_history: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ClaError::Precondition(m.into()));
        if self.grid_size == 0 {
            return bad("grid size must be at least 1");
        }
        if self.relearn_every == 0 {
            return bad("relearn interval must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.seq_len < 2 {
            return bad("sequence length must be at least 2");
        }
        if self.capacity == Some(0) || self.top_k == Some(0) {
            return bad("capacity and top-k must be positive when set");
        }
        if !self.sampler.exhaustive && self.sampler.n_samples == 0 {
            return bad("sampler needs at least one sample");
        }
        if let ThresholdMode::Fixed { value } = self.threshold {
            if value.is_nan() {
                return bad("fixed threshold is NaN");
            }
        }
        Ok(())
    }

    fn ae_config(&self, k: usize) -> AeConfig {
        self.autoencoder.clone().unwrap_or_else(|| AeConfig::new(k, 1e-3, 300, self.sampler.seed))
    }
}

/// Forecasts and trace emitted by one engine step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub step: usize,
    pub time: TimeId,
    pub entities: Vec<EntityId>,
    pub forecast: Vec<f64>,
    pub base_forecast: Vec<f64>,
    pub trace: StepTrace,
}

struct Source {
    params: ParamSnapshot,
    rows: FeatureMatrix,
    repr: Option<ContextRepresentation>,
}

struct Participant {
    slot: Option<Slot>,
    source: usize,
    dissimilarity: Option<f64>,
    weight: f64,
    recalled: bool,
}

struct Recall {
    participants: Vec<Participant>,
    forecast: Vec<f64>,
}

pub struct ClaEngine<'a> {
    panel: &'a Panel,
    targets: &'a TargetSeries,
    learner: &'a dyn Learner,
    config: EngineConfig,
    scorer: Scorer,
    ae: AeConfig,
    t0: usize,
    next: usize,
    seqs: Vec<Option<Vec<FeatureMatrix>>>,
    sources: Vec<Option<Source>>,
    preds: HashMap<(usize, usize), Vec<f64>>,
    scores: HashMap<(usize, usize), f64>,
    base_errors: Vec<Option<f64>>,
    gate: GateState,
    live: Slots,
    thresholds: Vec<Option<f64>>,
}

fn stream(source: usize, target: usize) -> u64 {
    ((source as u64) << 32) ^ target as u64
}

fn finite_or_none(j: f64) -> Option<f64> {
    j.is_finite().then_some(j)
}

impl<'a> ClaEngine<'a> {
    pub fn new(
        panel: &'a Panel,
        targets: &'a TargetSeries,
        learner: &'a dyn Learner,
        config: EngineConfig,
    ) -> Result<Self> {
        config.validate()?;
        let h = targets.horizon();
        let t0 = (h + config.window - 1).max(h + 1);
        if panel.len() <= t0 {
            return Err(ClaError::Precondition(format!(
                "panel has {} cross-sections, need more than {t0} for window {} and horizon {h}",
                panel.len(),
                config.window
            )));
        }
        let n = panel.len();
        let scorer = Scorer { strategy: config.strategy, sampler: config.sampler, band: config.dtw_band };
        let ae = config.ae_config(panel.width());
        Ok(Self {
            panel,
            targets,
            learner,
            scorer,
            ae,
            t0,
            next: t0,
            seqs: (0..n).map(|_| None).collect(),
            sources: (0..n).map(|_| None).collect(),
            preds: HashMap::new(),
            scores: HashMap::new(),
            base_errors: vec![None; n],
            gate: GateState::new(config.grid_size)?,
            live: Slots::new(config.capacity),
            thresholds: Vec::new(),
            config,
        })
    }

    /// Index of the first forecasting step.
    pub fn first_step(&self) -> usize {
        self.t0
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn gate(&self) -> &GateState {
        &self.gate
    }

    /// Thresholds the remember cue was checked against, one per step taken.
    pub fn thresholds_used(&self) -> &[Option<f64>] {
        &self.thresholds
    }

    pub fn is_finished(&self) -> bool {
        self.next >= self.panel.len()
    }

    /// Alive memories as full columns.
    pub fn memory_store(&self) -> Result<MemoryStore> {
        let mut store = MemoryStore::new(self.config.capacity)?;
        for slot in self.live.items() {
            let src = self.source(slot.source)?;
            let repr =
                src.repr.clone().ok_or_else(|| ClaError::Precondition("memory without representation".into()))?;
            store.append(MemoryColumn {
                id: slot.id,
                created_at: self.panel.section(slot.created).time.clone(),
                repr,
                params: src.params.clone(),
            })?;
        }
        Ok(store)
    }

    /// Runs every remaining step.
    pub fn run(&mut self) -> Result<Vec<StepOutput>> {
        let mut out = Vec::new();
        while let Some(o) = self.step()? {
            out.push(o);
        }
        Ok(out)
    }

    /// Advances one cross-section. `None` once the panel is exhausted.
    pub fn step(&mut self) -> Result<Option<StepOutput>> {
        let s = self.next;
        if s >= self.panel.len() {
            return Ok(None);
        }
        let h = self.targets.horizon();

        // backward pass
        let base_error = if s >= self.t0 + h { self.observe_outcome(s - h)? } else { None };
        self.base_errors[s] = base_error;
        let j = self.threshold_in_force(s)?;
        self.thresholds.push(finite_or_none(j));
        let fired = base_error.is_some_and(|e| e > j);
        let (mut new_memory, mut evicted) = (None, None);
        if fired {
            self.ensure_reprs(&[s - 1])?;
            let (id, ev) = self.live.push(s - 1, s);
            debug!("step {s}: remembered base from step {} as m{id}", s - 1);
            new_memory = Some(id);
            evicted = ev;
        }
        if self.config.threshold == ThresholdMode::Learned
            && (s - self.t0).is_multiple_of(self.config.relearn_every)
            && self.gate.error_history().len() >= 2
        {
            let learned = learn_jcrit(self.gate.error_history(), self.config.grid_size, |c| self.replay_error(s, c))?;
            if let Some(jn) = learned {
                self.gate.set_j_crit(jn);
            }
        }

        // base learner on the current window
        self.ensure_source(s)?;

        // forward pass
        let needed: Vec<usize> = if self.config.threshold == ThresholdMode::Learned {
            (self.t0..=s).collect()
        } else {
            self.live.items().iter().map(|m| m.source).chain([s]).collect()
        };
        self.ensure_pairs(s, &needed, needed.len() > 1)?;
        let mut live = std::mem::take(&mut self.live);
        let recall = self.recall(&mut live, s);
        self.live = live;
        let recall = recall?;

        let section = self.panel.section(s);
        let base_forecast = self.preds[&(s, s)].clone();
        let participants = recall
            .participants
            .iter()
            .map(|p| {
                let preds = self.preds.get(&(p.source, s));
                let forecast_mean = preds.map_or(f64::NAN, |v| v.iter().sum::<f64>() / v.len() as f64);
                ParticipantTrace {
                    id: p.slot.map_or_else(|| "base".to_string(), |m| format!("m{}", m.id)),
                    memory_id: p.slot.map(|m| m.id),
                    created_at: p.slot.map(|m| self.panel.section(m.created).time.clone()),
                    trained_at: self.panel.section(p.source).time.clone(),
                    dissimilarity: p.dissimilarity,
                    weight: p.weight,
                    recalled: p.recalled,
                    forecast_mean: if p.recalled { forecast_mean } else { 0.0 },
                }
            })
            .collect();
        let trace = StepTrace {
            t: section.time.clone(),
            step: s,
            base_error,
            j_crit: finite_or_none(j),
            remember_fired: fired,
            new_memory,
            evicted,
            participants,
            forecast_summary: ForecastSummary::of(&recall.forecast),
        };
        self.next += 1;
        Ok(Some(StepOutput {
            step: s,
            time: section.time.clone(),
            entities: section.entities.clone(),
            forecast: recall.forecast,
            base_forecast,
            trace,
        }))
    }

    /// Mean absolute base-learner error for the forecast issued at `step`,
    /// appended to the gate's history. `None` when no target is observable.
    fn observe_outcome(&mut self, step: usize) -> Result<Option<f64>> {
        let forecast = self
            .preds
            .get(&(step, step))
            .ok_or_else(|| ClaError::NeverForecast(self.panel.section(step).time.to_string()))?;
        let Some((f, y)) = self.realized_pairs(step, forecast) else {
            return Ok(None);
        };
        self.gate.observe_outcome(&f, &y).map(Some)
    }

    fn realized_pairs(&self, step: usize, forecast: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let section = self.panel.section(step);
        let (mut f, mut y) = (Vec::new(), Vec::new());
        for (e, &p) in section.entities.iter().zip(forecast) {
            if let Some(v) = self.targets.get(&section.time, e) {
                f.push(p);
                y.push(v);
            }
        }
        (!f.is_empty()).then_some((f, y))
    }

    fn step_error(&self, step: usize, forecast: &[f64]) -> Option<f64> {
        self.realized_pairs(step, forecast).map(|(f, y)| mean_abs_error(&f, &y))
    }

    fn threshold_in_force(&self, s: usize) -> Result<f64> {
        Ok(match &self.config.threshold {
            ThresholdMode::Learned => self.gate.j_crit(),
            ThresholdMode::Fixed { value } => *value,
            ThresholdMode::Disabled => f64::INFINITY,
            ThresholdMode::Recorded { thresholds } => {
                let i = s - self.t0;
                let j = thresholds
                    .get(i)
                    .ok_or_else(|| ClaError::Precondition(format!("recorded thresholds end before step {i}")))?;
                j.unwrap_or(f64::INFINITY)
            }
        })
    }

    /// Mean absolute mixture error over every step observable at `upto`,
    /// replaying the gate from the first step with a fixed threshold.
    fn replay_error(&self, upto: usize, threshold: f64) -> Result<f64> {
        let h = self.targets.horizon();
        let mut slots = Slots::new(self.config.capacity);
        let (mut total, mut n) = (0.0, 0usize);
        for s in self.t0..=upto - h {
            if self.base_errors[s].is_some_and(|e| e > threshold) {
                slots.push(s - 1, s);
            }
            let r = self.recall(&mut slots, s)?;
            if let Some(e) = self.step_error(s, &r.forecast) {
                total += e;
                n += 1;
            }
        }
        Ok(if n == 0 { 0.0 } else { total / n as f64 })
    }

    /// Scores alive memories and the base learner at step `s` and balances
    /// their forecasts. All needed pairs must already be cached.
    fn recall(&self, slots: &mut Slots, s: usize) -> Result<Recall> {
        let missing = || ClaError::Precondition(format!("uncached score or forecast at step {s}"));
        let alive = slots.items().to_vec();
        if alive.is_empty() {
            let forecast = self.preds.get(&(s, s)).ok_or_else(missing)?.clone();
            let base = Participant { slot: None, source: s, dissimilarity: None, weight: 1.0, recalled: true };
            return Ok(Recall { participants: vec![base], forecast });
        }
        let score = |k: usize| self.scores.get(&(k, s)).copied().ok_or_else(missing);
        let mut memories = alive.iter().map(|m| Ok((*m, score(m.source)?))).collect::<Result<Vec<(Slot, f64)>>>()?;
        let mut recalled = vec![true; memories.len()];
        if let Some(k) = self.config.top_k.filter(|&k| k < memories.len()) {
            let mut order: Vec<usize> = (0..memories.len()).collect();
            order.sort_by(|&a, &b| {
                memories[a].1.total_cmp(&memories[b].1).then(memories[a].0.id.cmp(&memories[b].0.id))
            });
            recalled = vec![false; memories.len()];
            for &i in &order[..k] {
                recalled[i] = true;
            }
        }
        let base_d = score(s)?;
        let mut ds = vec![base_d];
        let mut forecasts: Vec<&[f64]> = vec![self.preds.get(&(s, s)).ok_or_else(missing)?];
        for ((m, d), &r) in memories.iter().zip(&recalled) {
            if r {
                ds.push(*d);
                forecasts.push(self.preds.get(&(m.source, s)).ok_or_else(missing)?);
            }
        }
        let weights = balance_weights(&ds)?;
        let forecast = mix_forecasts(&weights, &forecasts)?;

        let mut participants = vec![Participant {
            slot: None,
            source: s,
            dissimilarity: Some(base_d),
            weight: weights[0],
            recalled: true,
        }];
        let mut wi = weights[1..].iter();
        for ((m, d), r) in memories.drain(..).zip(recalled) {
            let weight = if r { *wi.next().expect("one weight per recalled memory") } else { 0.0 };
            participants.push(Participant {
                slot: Some(m),
                source: m.source,
                dissimilarity: Some(d),
                weight,
                recalled: r,
            });
        }
        let mut best = 0;
        for (i, p) in participants.iter().enumerate() {
            if p.weight > participants[best].weight {
                best = i;
            }
        }
        if let Some(m) = participants[best].slot {
            slots.mark_max(m.id, s);
        }
        Ok(Recall { participants, forecast })
    }

    fn source(&self, k: usize) -> Result<&Source> {
        self.sources[k].as_ref().ok_or_else(|| ClaError::Precondition(format!("no base learner trained at step {k}")))
    }

    fn ensure_source(&mut self, k: usize) -> Result<()> {
        if self.sources[k].is_some() {
            return Ok(());
        }
        let time = self.panel.section(k).time.clone();
        let set = if self.learner.is_sequential() {
            history_window(self.panel, self.targets, k, self.config.seq_len, self.config.max_history)?
        } else {
            sliding_window_at(self.panel, self.targets, k, self.config.window)?
        };
        let params = self.learner.fit(&set, &time)?;
        self.sources[k] = Some(Source { params, rows: set.rows, repr: None });
        Ok(())
    }

    fn ensure_reprs(&mut self, ks: &[usize]) -> Result<()> {
        let todo: Vec<usize> =
            ks.iter().copied().filter(|&k| self.sources[k].as_ref().is_some_and(|s| s.repr.is_none())).collect();
        let built: Vec<(usize, ContextRepresentation)> = todo
            .par_iter()
            .map(|&k| {
                let src = self.sources[k].as_ref().expect("filtered");
                let ae = AeConfig { seed: mix_seed(self.ae.seed, k as u64), ..self.ae.clone() };
                let time = self.panel.section(k).time.clone();
                ContextRepresentation::build(self.config.strategy, &src.rows, &ae, Some(time)).map(|r| (k, r))
            })
            .collect::<Result<_>>()?;
        for (k, r) in built {
            self.sources[k].as_mut().expect("filtered").repr = Some(r);
        }
        Ok(())
    }

    fn ensure_seqs(&mut self, s: usize) {
        if self.learner.is_sequential() && self.seqs[s].is_none() {
            self.seqs[s] = Some(sequences_at(self.panel, s, self.config.seq_len));
        }
    }

    /// Caches forecasts of every source in `ks` on step `s`, plus scores when asked.
    fn ensure_pairs(&mut self, s: usize, ks: &[usize], with_scores: bool) -> Result<()> {
        for &k in ks {
            self.ensure_source(k)?;
        }
        self.ensure_seqs(s);
        if with_scores {
            self.ensure_reprs(ks)?;
        }
        let rows = &self.panel.section(s).values;
        let seqs = self.seqs[s].as_deref();
        let new_preds: Vec<((usize, usize), Vec<f64>)> = ks
            .par_iter()
            .filter(|&&k| !self.preds.contains_key(&(k, s)))
            .map(|&k| {
                let src = self.sources[k].as_ref().expect("ensured");
                src.params.forecast(rows, seqs).map(|p| ((k, s), p))
            })
            .collect::<Result<_>>()?;
        let new_scores: Vec<((usize, usize), f64)> = if with_scores {
            ks.par_iter()
                .filter(|&&k| !self.scores.contains_key(&(k, s)))
                .map(|&k| {
                    let repr = self.sources[k].as_ref().and_then(|x| x.repr.as_ref()).expect("ensured");
                    self.scorer.score(repr, rows, stream(k, s)).map(|d| ((k, s), d.value))
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        self.preds.extend(new_preds);
        self.scores.extend(new_scores);
        Ok(())
    }
}
