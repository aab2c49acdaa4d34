//! Synthetic regime-switching panel generator.
//!
//! Each regime owns a linear map `w_r` from features to forward returns and a
//! noise scale. Features are drawn around an optional per-regime lag profile,
//! which may be jittered along the lag axis to inject time deformation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CrossSection, EntityId, Panel, TargetSeries, TimeId};
use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;

/// One regime interval, running from `start` until the next regime's start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub start: usize,
    pub label: String,
    pub weights: Vec<f64>,
    pub noise: f64,
    /// Mean feature row for this regime (zeros when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeSchedule {
    regimes: Vec<RegimeSpec>,
    end: usize,
}

impl RegimeSchedule {
    /// Builds a schedule covering `[0, end)`. Regime starts must begin at 0
    /// and strictly increase.
    pub fn new(regimes: Vec<RegimeSpec>, end: usize) -> Result<Self> {
        let Some(first) = regimes.first() else {
            return Err(ClaError::ScheduleInvalid("no regimes".into()));
        };
        if first.start != 0 {
            return Err(ClaError::ScheduleInvalid(format!("gap: first regime starts at {} instead of 0", first.start)));
        }
        for pair in regimes.windows(2) {
            if pair[1].start <= pair[0].start {
                return Err(ClaError::ScheduleInvalid(format!(
                    "overlap: regime `{}` starts at {} but `{}` already started at {}",
                    pair[1].label, pair[1].start, pair[0].label, pair[0].start
                )));
            }
        }
        let last = regimes.last().expect("nonempty");
        if last.start >= end {
            return Err(ClaError::ScheduleInvalid(format!(
                "regime `{}` starts at {} beyond the span end {end}",
                last.label, last.start
            )));
        }
        for r in &regimes {
            if !(r.noise.is_finite() && r.noise >= 0.0) {
                return Err(ClaError::ScheduleInvalid(format!("regime `{}` has invalid noise", r.label)));
            }
            if r.weights.iter().any(|w| !w.is_finite()) {
                return Err(ClaError::ScheduleInvalid(format!("regime `{}` has non-finite weights", r.label)));
            }
        }
        Ok(Self { regimes, end })
    }

    pub fn regimes(&self) -> &[RegimeSpec] {
        &self.regimes
    }

    pub fn end(&self) -> usize {
        self.end
    }

    /// `true` if some label is used by more than one interval.
    pub fn has_recurrence(&self) -> bool {
        let mut labels: Vec<&str> = self.regimes.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        labels.windows(2).any(|w| w[0] == w[1])
    }

    /// Regime in force at step `t`.
    pub fn regime_at(&self, t: usize) -> &RegimeSpec {
        let i = self.regimes.partition_point(|r| r.start <= t);
        &self.regimes[i - 1]
    }

    /// Label in force at each step of the span.
    pub fn labels(&self) -> Vec<String> {
        (0..self.end).map(|t| self.regime_at(t).label.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub n_entities: usize,
    pub n_features: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Standard deviation of the per-feature noise around the profile.
    pub feature_noise: f64,
    /// Maximum absolute lag shift applied to each row's profile.
    pub lag_jitter: usize,
}

/// JSON generator configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub regimes: Vec<RegimeSpec>,
    pub entities: usize,
    pub features: usize,
    pub seed: u64,
    /// Number of generated time-steps.
    pub steps: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_feature_noise")]
    pub feature_noise: f64,
    #[serde(default)]
    pub lag_jitter: usize,
    /// Reject schedules in which no regime label recurs.
    #[serde(default)]
    pub require_recurrence: bool,
}

fn default_horizon() -> usize {
    1
}

fn default_feature_noise() -> f64 {
    1.0
}

impl GeneratorConfig {
    pub fn schedule(&self) -> Result<RegimeSchedule> {
        let s = RegimeSchedule::new(self.regimes.clone(), self.steps)?;
        if self.require_recurrence && !s.has_recurrence() {
            return Err(ClaError::ScheduleInvalid("recurrence required but no label recurs".into()));
        }
        Ok(s)
    }

    pub fn options(&self) -> GeneratorOptions {
        GeneratorOptions {
            n_entities: self.entities,
            n_features: self.features,
            seed: self.seed,
            horizon: self.horizon,
            feature_noise: self.feature_noise,
            lag_jitter: self.lag_jitter,
        }
    }

    pub fn generate(&self) -> Result<GeneratedPanel> {
        generate_regime_panel(&self.schedule()?, &self.options())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedPanel {
    pub panel: Panel,
    pub targets: TargetSeries,
    pub regime_labels: Vec<String>,
}

/// Time ids are zero-padded step numbers so lexicographic order is chronological.
pub fn step_time_id(t: usize) -> TimeId {
    TimeId(format!("{t:04}"))
}

fn entity_id(i: usize, n: usize) -> EntityId {
    let width = n.saturating_sub(1).to_string().len().max(3);
    EntityId(format!("e{i:0width$}"))
}

/// Generates features `x` and forward returns `y = x . w_r + noise_r * eps`.
///
/// Identical schedule and options give bit-identical output.
pub fn generate_regime_panel(schedule: &RegimeSchedule, opts: &GeneratorOptions) -> Result<GeneratedPanel> {
    if opts.n_entities < 20 {
        return Err(ClaError::Precondition(format!("generator needs at least 20 entities, got {}", opts.n_entities)));
    }
    let k = opts.n_features;
    if k == 0 {
        return Err(ClaError::Precondition("generator needs at least one feature".into()));
    }
    if !(opts.feature_noise.is_finite() && opts.feature_noise >= 0.0) {
        return Err(ClaError::Precondition("feature_noise must be finite and nonnegative".into()));
    }
    for r in schedule.regimes() {
        if r.weights.len() != k {
            return Err(ClaError::ScheduleInvalid(format!(
                "regime `{}` has {} weights for {k} features",
                r.label,
                r.weights.len()
            )));
        }
        if let Some(p) = &r.profile {
            if p.len() != k || p.iter().any(|v| !v.is_finite()) {
                return Err(ClaError::ScheduleInvalid(format!("regime `{}` has a bad profile", r.label)));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let entities: Vec<EntityId> = (0..opts.n_entities).map(|i| entity_id(i, opts.n_entities)).collect();
    let mut targets = TargetSeries::new(opts.horizon)?;
    let mut sections = Vec::with_capacity(schedule.end());
    let zeros = vec![0.0; k];
    let jitter = opts.lag_jitter as i64;

    for t in 0..schedule.end() {
        let regime = schedule.regime_at(t);
        let profile = regime.profile.as_deref().unwrap_or(&zeros);
        let time = step_time_id(t);
        let mut values = FeatureMatrix::with_cols(k);
        let mut row = vec![0.0; k];
        for e in &entities {
            let shift = if jitter > 0 { rng.random_range(-jitter..=jitter) } else { 0 };
            for (j, x) in row.iter_mut().enumerate() {
                let src = (j as i64 - shift).clamp(0, k as i64 - 1) as usize;
                let z: f64 = rng.sample(StandardNormal);
                *x = profile[src] + opts.feature_noise * z;
            }
            let eps: f64 = rng.sample(StandardNormal);
            let y = row.iter().zip(&regime.weights).map(|(x, w)| x * w).sum::<f64>() + regime.noise * eps;
            values.push_row(&row)?;
            targets.insert(time.clone(), e.clone(), y)?;
        }
        sections.push(CrossSection { time, entities: entities.clone(), values });
    }

    let names = (0..k).map(|j| format!("lag_{j}")).collect();
    Ok(GeneratedPanel { panel: Panel::new(names, sections)?, targets, regime_labels: schedule.labels() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ols::fit_with_intercept;

    fn regime(start: usize, label: &str, weights: Vec<f64>, noise: f64) -> RegimeSpec {
        RegimeSpec { start, label: label.into(), weights, noise, profile: None }
    }

    fn aba(noise: f64) -> RegimeSchedule {
        RegimeSchedule::new(
            vec![
                regime(0, "A", vec![0.5, -0.2, 0.1], noise),
                regime(10, "B", vec![-0.4, 0.3, 0.0], noise),
                regime(20, "A", vec![0.5, -0.2, 0.1], noise),
            ],
            30,
        )
        .unwrap()
    }

    fn opts(seed: u64) -> GeneratorOptions {
        GeneratorOptions { n_entities: 25, n_features: 3, seed, horizon: 1, feature_noise: 1.0, lag_jitter: 0 }
    }

    #[test]
    fn same_seed_same_panel() {
        let a = generate_regime_panel(&aba(0.1), &opts(7)).unwrap();
        let b = generate_regime_panel(&aba(0.1), &opts(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_regime_panel(&aba(0.1), &opts(8)).unwrap();
        assert_ne!(a.panel, c.panel);
    }

    #[test]
    fn labels_echo_schedule() {
        let g = generate_regime_panel(&aba(0.1), &opts(1)).unwrap();
        let expect: Vec<String> =
            ["A"; 10].iter().chain(["B"; 10].iter()).chain(["A"; 10].iter()).map(|s| s.to_string()).collect();
        assert_eq!(g.regime_labels, expect);
    }

    #[test]
    fn noiseless_regime_is_recovered_by_ols() {
        let g = generate_regime_panel(&aba(0.0), &opts(3)).unwrap();
        for window in [(0usize, 4usize), (3, 9), (21, 29)] {
            let mut x = FeatureMatrix::with_cols(3);
            let mut y = Vec::new();
            for t in window.0..=window.1 {
                let s = g.panel.section(t);
                x.extend(&s.values).unwrap();
                y.extend(s.entities.iter().map(|e| g.targets.get(&s.time, e).unwrap()));
            }
            let (a, w) = fit_with_intercept(&x, &y).unwrap();
            assert!(a.abs() < 1e-8);
            for (got, want) in w.iter().zip([0.5, -0.2, 0.1]) {
                assert!((got - want).abs() < 1e-8, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn gapped_and_overlapping_schedules_are_rejected() {
        let gapped = RegimeSchedule::new(vec![regime(2, "A", vec![1.0], 0.0)], 10);
        assert!(matches!(gapped, Err(ClaError::ScheduleInvalid(_))));
        let overlap = RegimeSchedule::new(
            vec![regime(0, "A", vec![1.0], 0.0), regime(5, "B", vec![1.0], 0.0), regime(5, "A", vec![1.0], 0.0)],
            10,
        );
        assert!(matches!(overlap, Err(ClaError::ScheduleInvalid(_))));
        let past_end = RegimeSchedule::new(vec![regime(0, "A", vec![1.0], 0.0), regime(10, "B", vec![1.0], 0.0)], 10);
        assert!(past_end.is_err());
    }

    #[test]
    fn recurrence_is_detected() {
        assert!(aba(0.0).has_recurrence());
        let ab = RegimeSchedule::new(vec![regime(0, "A", vec![1.0], 0.0), regime(3, "B", vec![1.0], 0.0)], 6).unwrap();
        assert!(!ab.has_recurrence());
    }

    #[test]
    fn too_few_entities() {
        let mut o = opts(1);
        o.n_entities = 19;
        assert!(matches!(generate_regime_panel(&aba(0.0), &o), Err(ClaError::Precondition(_))));
    }

    #[test]
    fn config_parses_documented_fields() {
        let cfg: GeneratorConfig = serde_json::from_str(
            r#"{"regimes":[{"start":0,"label":"A","weights":[1.0],"noise":0.1}],
                "entities":20,"features":1,"seed":5,"steps":4}"#,
        )
        .unwrap();
        assert_eq!(cfg.horizon, 1);
        assert_eq!(cfg.feature_noise, 1.0);
        let g = cfg.generate().unwrap();
        assert_eq!(g.panel.len(), 4);
        assert_eq!(g.targets.len(), 80);
    }
}
