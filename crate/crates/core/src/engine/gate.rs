//! Remember-gate: the base learner's absolute error series and the
//! grid-learned critical threshold.

use rayon::prelude::*;

use crate::error::{ClaError, Result};

pub const DEFAULT_GRID_SIZE: usize = 20;

/// Error history and the threshold currently in force.
#[derive(Clone, Debug, PartialEq)]
pub struct GateState {
    error_history: Vec<f64>,
    j_crit: f64,
    grid_size: usize,
}

impl GateState {
    pub fn new(grid_size: usize) -> Result<Self> {
        if grid_size == 0 {
            return Err(ClaError::Precondition("grid size must be at least 1".into()));
        }
        Ok(Self { error_history: Vec::new(), j_crit: f64::INFINITY, grid_size })
    }

    pub fn error_history(&self) -> &[f64] {
        &self.error_history
    }

    /// Current threshold; `+inf` until one has been learned.
    pub fn j_crit(&self) -> f64 {
        self.j_crit
    }

    pub fn set_j_crit(&mut self, j: f64) {
        self.j_crit = j;
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Appends the mean absolute error between a forecast and its realized
    /// values and returns it.
    pub fn observe_outcome(&mut self, forecast: &[f64], realized: &[f64]) -> Result<f64> {
        if forecast.len() != realized.len() {
            return Err(ClaError::WidthMismatch { expected: forecast.len(), found: realized.len() });
        }
        if forecast.is_empty() {
            return Err(ClaError::Precondition("no realized values to compare".into()));
        }
        let e = mean_abs_error(forecast, realized);
        self.observe_error(e)?;
        Ok(e)
    }

    pub fn observe_error(&mut self, e: f64) -> Result<()> {
        if !(e.is_finite() && e >= 0.0) {
            return Err(ClaError::NonFinite(format!("base error {e}")));
        }
        self.error_history.push(e);
        Ok(())
    }

    /// Whether the latest error exceeds the threshold in force.
    pub fn remember_cue(&self) -> bool {
        self.error_history.last().is_some_and(|&e| e > self.j_crit)
    }
}

pub fn mean_abs_error(forecast: &[f64], realized: &[f64]) -> f64 {
    let total: f64 = forecast.iter().zip(realized).map(|(f, y)| (f - y).abs()).sum();
    total / forecast.len() as f64
}

/// Equidistant candidates from `min(errors)` to `max(errors)` inclusive,
/// ascending. `None` with fewer than two observations.
pub fn jcrit_grid(errors: &[f64], grid_size: usize) -> Option<Vec<f64>> {
    if errors.len() < 2 || grid_size == 0 {
        return None;
    }
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if grid_size == 1 {
        return Some(vec![hi]);
    }
    let step = (hi - lo) / (grid_size - 1) as f64;
    let mut grid: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();
    grid[grid_size - 1] = hi;
    Some(grid)
}

/// Picks the grid candidate whose replayed mean absolute error is lowest,
/// preferring the largest candidate on ties. Returns `None` (keep the
/// previous threshold) with fewer than two observations.
pub fn learn_jcrit<F>(errors: &[f64], grid_size: usize, replay: F) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let Some(grid) = jcrit_grid(errors, grid_size) else {
        return Ok(None);
    };
    let scores: Vec<f64> = grid.par_iter().map(|&c| replay(c)).collect::<Result<_>>()?;
    Ok(Some(select_candidate(&grid, &scores)))
}

/// Argmin over `scores`, scanning from the largest candidate so that ties
/// resolve upward.
pub fn select_candidate(grid: &[f64], scores: &[f64]) -> f64 {
    let mut best = grid.len() - 1;
    for i in (0..grid.len()).rev() {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    grid[best]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observe_appends_absolute_error() {
        let mut g = GateState::new(DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(g.observe_outcome(&[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(g.observe_outcome(&[2.0], &[-1.0]).unwrap(), 3.0);
        assert_eq!(g.error_history(), &[0.0, 3.0]);
    }

    #[test]
    fn cue_is_strict() {
        let mut g = GateState::new(4).unwrap();
        g.observe_error(1.0).unwrap();
        assert!(!g.remember_cue());
        g.set_j_crit(1.0);
        assert!(!g.remember_cue());
        g.set_j_crit(0.999);
        assert!(g.remember_cue());
    }

    #[test]
    fn grid_spans_range() {
        let g = jcrit_grid(&[3.0, 1.0, 2.0], 5).unwrap();
        assert_eq!(g, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert!(jcrit_grid(&[1.0], 5).is_none());
    }

    #[test]
    fn constant_history_returns_largest() {
        let j = learn_jcrit(&[0.5; 6], DEFAULT_GRID_SIZE, |_| Ok(1.0)).unwrap();
        assert_eq!(j, Some(0.5));
    }

    #[test]
    fn ties_go_up() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(select_candidate(&grid, &[5.0, 1.0, 1.0, 2.0]), 2.0);
        assert_eq!(select_candidate(&grid, &[0.5, 1.0, 1.0, 2.0]), 0.0);
    }

    #[test]
    fn too_few_observations_keep_previous() {
        assert_eq!(learn_jcrit(&[1.0], 20, |_| Ok(0.0)).unwrap(), None);
    }
}
