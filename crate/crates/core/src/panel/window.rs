//! Training-set extraction that never looks past the targets observable at
//! the estimation time.

use super::{Panel, TargetSeries, TimeId};
use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;

/// Four quarters, the sliding learner's window.
pub const DEFAULT_SLIDING_WIDTH: usize = 4;

/// Feature rows paired with their realized targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub rows: FeatureMatrix,
    pub targets: Vec<f64>,
    /// Per-row entity history ending with the row itself (oldest first).
    /// Populated for sequence learners only.
    pub sequences: Option<Vec<FeatureMatrix>>,
    /// Panel index at which each row's features were observed.
    pub feature_index: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows.ncols()
    }
}

fn last_observable(targets: &TargetSeries, end: usize) -> Option<usize> {
    end.checked_sub(targets.horizon())
}

/// Pairs from the `width` most recent cross-sections whose targets are
/// observable at `end_time`.
pub fn sliding_window(panel: &Panel, targets: &TargetSeries, end_time: &TimeId, width: usize) -> Result<TrainingSet> {
    let end = panel
        .index_of(end_time)
        .ok_or_else(|| ClaError::Precondition(format!("time `{end_time}` is not in the panel")))?;
    sliding_window_at(panel, targets, end, width)
}

/// Index-based form of [`sliding_window`].
pub fn sliding_window_at(panel: &Panel, targets: &TargetSeries, end: usize, width: usize) -> Result<TrainingSet> {
    if width == 0 {
        return Err(ClaError::Precondition("window width must be positive".into()));
    }
    if end >= panel.len() {
        return Err(ClaError::Precondition(format!("end index {end} beyond panel of {}", panel.len())));
    }
    if end + 1 < width {
        return Err(ClaError::Precondition(format!("end index {end} has fewer than {width} cross-sections behind it")));
    }
    let Some(last) = last_observable(targets, end) else {
        return Err(ClaError::EmptyTrainingSet);
    };
    let first = (last + 1).saturating_sub(width);
    let mut set = TrainingSet {
        rows: FeatureMatrix::with_cols(panel.width()),
        targets: Vec::new(),
        sequences: None,
        feature_index: Vec::new(),
    };
    for si in first..=last {
        let s = panel.section(si);
        for (ri, e) in s.entities.iter().enumerate() {
            if let Some(y) = targets.get(&s.time, e) {
                set.rows.push_row(s.values.row(ri))?;
                set.targets.push(y);
                set.feature_index.push(si);
            }
        }
    }
    if set.is_empty() {
        return Err(ClaError::EmptyTrainingSet);
    }
    Ok(set)
}

/// Every observable pair up to `end` (optionally the last `max_history`
/// cross-sections only), each with its entity's history of at most `seq_len`
/// rows. Rows whose entity has fewer than two observations are skipped.
pub fn history_window(
    panel: &Panel,
    targets: &TargetSeries,
    end: usize,
    seq_len: usize,
    max_history: Option<usize>,
) -> Result<TrainingSet> {
    if end >= panel.len() {
        return Err(ClaError::Precondition(format!("end index {end} beyond panel of {}", panel.len())));
    }
    let Some(last) = last_observable(targets, end) else {
        return Err(ClaError::EmptyTrainingSet);
    };
    let first = max_history.map_or(0, |h| (last + 1).saturating_sub(h));
    let mut set = TrainingSet {
        rows: FeatureMatrix::with_cols(panel.width()),
        targets: Vec::new(),
        sequences: Some(Vec::new()),
        feature_index: Vec::new(),
    };
    let seqs = set.sequences.as_mut().expect("just set");
    for si in first..=last {
        let s = panel.section(si);
        for (ri, e) in s.entities.iter().enumerate() {
            let Some(y) = targets.get(&s.time, e) else { continue };
            let hist = panel.entity_history(si, e, seq_len).expect("entity present at si");
            if hist.nrows() < 2 {
                continue;
            }
            set.rows.push_row(s.values.row(ri))?;
            set.targets.push(y);
            set.feature_index.push(si);
            seqs.push(hist);
        }
    }
    if set.is_empty() {
        return Err(ClaError::EmptyTrainingSet);
    }
    Ok(set)
}

/// Histories (at most `seq_len` rows) for every entity of section `index`, in row order.
pub fn sequences_at(panel: &Panel, index: usize, seq_len: usize) -> Vec<FeatureMatrix> {
    let s = panel.section(index);
    s.entities.iter().map(|e| panel.entity_history(index, e, seq_len).expect("entity present")).collect()
}
