//! Cross-sectional time-series data: the panel of features, forward-return
//! targets, the synthetic regime generator, factor-loading estimation,
//! winsorization and training-window extraction.

mod csv_io;
mod generator;
mod loadings;
mod window;
mod winsorize;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;

pub use csv_io::{read_panel_csv, read_targets_csv, write_panel_csv, write_targets_csv};
pub use generator::{
    generate_regime_panel, step_time_id, GeneratedPanel, GeneratorConfig, GeneratorOptions, RegimeSchedule, RegimeSpec,
};
pub use loadings::{rolling_factor_loadings, DEFAULT_LOADING_WINDOW, LOADING_FEATURES};
pub use window::{history_window, sequences_at, sliding_window, sliding_window_at, TrainingSet, DEFAULT_SLIDING_WIDTH};
pub use winsorize::{inverse_ecdf_quantile, winsorize, DEFAULT_LOWER, DEFAULT_UPPER};

/// Opaque, lexicographically ordered time identifier (`"2007-01"`, `"0042"`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeId(pub String);

impl fmt::Display for TimeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TimeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Entity (security) identifier. Ordering is lexicographic and is the
/// tie-break order wherever one is needed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// The entities present at one time-step and their feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    pub time: TimeId,
    pub entities: Vec<EntityId>,
    pub values: FeatureMatrix,
}

impl CrossSection {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn row_of(&self, entity: &EntityId) -> Option<usize> {
        self.entities.iter().position(|e| e == entity)
    }
}

/// Time-ordered sequence of cross-sections with a fixed feature width.
///
/// Entity sets may differ between time-steps; an entity absent at a step
/// simply has no row there.
#[derive(Clone, Debug)]
pub struct Panel {
    feature_names: Vec<String>,
    sections: Vec<CrossSection>,
    // entity -> (section index, row index) in time order
    locator: BTreeMap<EntityId, Vec<(usize, usize)>>,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.feature_names == other.feature_names && self.sections == other.sections
    }
}

impl Panel {
    pub fn new(feature_names: Vec<String>, sections: Vec<CrossSection>) -> Result<Self> {
        let k = feature_names.len();
        if k == 0 {
            return Err(ClaError::Precondition("panel needs at least one feature".into()));
        }
        let mut locator: BTreeMap<EntityId, Vec<(usize, usize)>> = BTreeMap::new();
        for (si, s) in sections.iter().enumerate() {
            if si > 0 && sections[si - 1].time >= s.time {
                return Err(ClaError::Malformed(format!(
                    "times must be strictly increasing: `{}` follows `{}`",
                    s.time,
                    sections[si - 1].time
                )));
            }
            if s.values.nrows() != s.entities.len() {
                return Err(ClaError::Malformed(format!(
                    "time `{}` has {} entities but {} rows",
                    s.time,
                    s.entities.len(),
                    s.values.nrows()
                )));
            }
            if s.values.nrows() > 0 && s.values.ncols() != k {
                return Err(ClaError::WidthMismatch { expected: k, found: s.values.ncols() });
            }
            if !s.values.all_finite() {
                return Err(ClaError::NonFinite(format!("panel values at time `{}`", s.time)));
            }
            for (ri, e) in s.entities.iter().enumerate() {
                let slots = locator.entry(e.clone()).or_default();
                if slots.last().is_some_and(|&(last, _)| last == si) {
                    return Err(ClaError::Malformed(format!("entity `{e}` appears twice at time `{}`", s.time)));
                }
                slots.push((si, ri));
            }
        }
        Ok(Self { feature_names, sections, locator })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Number of features, K.
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Number of time-steps, T.
    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn sections(&self) -> &[CrossSection] {
        &self.sections
    }

    pub fn section(&self, index: usize) -> &CrossSection {
        &self.sections[index]
    }

    pub fn times(&self) -> Vec<TimeId> {
        self.sections.iter().map(|s| s.time.clone()).collect()
    }

    /// All entities that appear anywhere in the panel, in id order.
    pub fn entities(&self) -> Vec<EntityId> {
        self.locator.keys().cloned().collect()
    }

    pub fn index_of(&self, time: &TimeId) -> Option<usize> {
        self.sections.binary_search_by(|s| s.time.cmp(time)).ok()
    }

    /// The entity's most recent `max_len` rows up to and including section
    /// `index`, oldest first. `None` if the entity is absent at `index`.
    pub fn entity_history(&self, index: usize, entity: &EntityId, max_len: usize) -> Option<FeatureMatrix> {
        let slots = self.locator.get(entity)?;
        let end = slots.partition_point(|&(si, _)| si <= index);
        if end == 0 || slots[end - 1].0 != index {
            return None;
        }
        let start = end.saturating_sub(max_len.max(1));
        let mut m = FeatureMatrix::with_cols(self.width());
        for &(si, ri) in &slots[start..end] {
            m.push_row(self.sections[si].values.row(ri)).expect("width checked at construction");
        }
        Some(m)
    }
}

/// Realized forward returns keyed by the time at which the features were
/// observed. A target recorded at panel index `i` becomes observable at
/// index `i + horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSeries {
    horizon: usize,
    values: BTreeMap<TimeId, BTreeMap<EntityId, f64>>,
}

impl TargetSeries {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(ClaError::Precondition("target horizon must be positive".into()));
        }
        Ok(Self { horizon, values: BTreeMap::new() })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn insert(&mut self, time: TimeId, entity: EntityId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(ClaError::NonFinite(format!("target for `{entity}` at `{time}`")));
        }
        self.values.entry(time).or_default().insert(entity, value);
        Ok(())
    }

    pub fn get(&self, time: &TimeId, entity: &EntityId) -> Option<f64> {
        self.values.get(time)?.get(entity).copied()
    }

    pub fn at(&self, time: &TimeId) -> Option<&BTreeMap<EntityId, f64>> {
        self.values.get(time)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TimeId, &EntityId, f64)> {
        self.values.iter().flat_map(|(t, m)| m.iter().map(move |(e, v)| (t, e, *v)))
    }

    pub fn len(&self) -> usize {
        self.values.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
