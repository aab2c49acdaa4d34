//! Experiment configuration: one JSON document, optionally overridden by
//! command-line flags.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cla_core::engine::{EngineConfig, ThresholdMode, DEFAULT_GRID_SIZE};
use cla_core::experiment::BacktestConfig;
use cla_core::learners::{AeConfig, LearnerKind, LearnerSpec};
use cla_core::panel::{read_panel_csv, read_targets_csv, GeneratorConfig, DEFAULT_SLIDING_WIDTH};
use cla_core::similarity::{SamplerConfig, Strategy, DEFAULT_SAMPLES};
use cla_core::{Panel, TargetSeries};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Synthetic regime panel. Each run seed is added to the generator seed.
    Generate(GeneratorConfig),
    Csv {
        panel: PathBuf,
        targets: PathBuf,
        horizon: usize,
    },
}

/// A learner entry: either a bare kind (`"ffnn"`) or an object with overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "LearnerEntry")]
pub struct LearnerChoice {
    pub kind: LearnerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnerFields {
    kind: LearnerKind,
    #[serde(default)]
    hidden: Option<Vec<usize>>,
    #[serde(default)]
    learning_rate: Option<f64>,
    #[serde(default)]
    epochs: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LearnerEntry {
    Kind(LearnerKind),
    Full(LearnerFields),
}

impl From<LearnerEntry> for LearnerChoice {
    fn from(e: LearnerEntry) -> Self {
        match e {
            LearnerEntry::Kind(kind) => Self::of(kind),
            LearnerEntry::Full(f) => {
                Self { kind: f.kind, hidden: f.hidden, learning_rate: f.learning_rate, epochs: f.epochs }
            }
        }
    }
}

impl LearnerChoice {
    pub fn of(kind: LearnerKind) -> Self {
        Self { kind, hidden: None, learning_rate: None, epochs: None }
    }

    pub fn spec(&self, input_width: usize, seq_len: usize, seed: u64) -> LearnerSpec {
        let mut spec = LearnerSpec::default_for(self.kind, input_width, seed);
        if let Some(h) = &self.hidden {
            spec.layer_sizes = h.clone();
        }
        if let Some(lr) = self.learning_rate {
            spec.learning_rate = lr;
        }
        if let Some(e) = self.epochs {
            spec.epochs = e;
        }
        if self.kind.is_sequential() {
            spec.seq_len = seq_len;
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateSettings {
    pub threshold: ThresholdMode,
    pub grid_size: usize,
    pub relearn_every: usize,
    pub capacity: Option<usize>,
    pub top_k: Option<usize>,
}

impl Default for GateSettings {
    fn default() -> Self {
        Self {
            threshold: ThresholdMode::Learned,
            grid_size: DEFAULT_GRID_SIZE,
            relearn_every: 1,
            capacity: None,
            top_k: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeSettings {
    /// Defaults to the panel width.
    pub hidden_width: Option<usize>,
    pub sparsity_weight: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for AeSettings {
    fn default() -> Self {
        Self { hidden_width: None, sparsity_weight: 1e-3, epochs: 300, learning_rate: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    pub window: usize,
    pub seq_len: usize,
    pub max_history: Option<usize>,
    pub samples: usize,
    pub exhaustive_sampling: bool,
    pub dtw_band: Option<usize>,
    pub autoencoder: AeSettings,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            window: DEFAULT_SLIDING_WIDTH,
            seq_len: 4,
            max_history: None,
            samples: DEFAULT_SAMPLES,
            exhaustive_sampling: false,
            dtw_band: None,
            autoencoder: AeSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub learners: Vec<LearnerChoice>,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub gate: GateSettings,
    #[serde(default)]
    pub engine: EngineSettings,
    #[serde(default)]
    pub backtest: BacktestConfig,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// Command-line overrides. Each set field replaces the matching config key.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strategy: Option<Strategy>,
    pub learner: Option<LearnerKind>,
    pub disable_gate: bool,
}

/// Loaded input data for one seed.
pub struct Dataset {
    pub panel: Panel,
    pub targets: TargetSeries,
    pub regime_labels: Option<Vec<String>>,
}

impl ExperimentConfig {
    /// Reads a config file. Relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataSource::Csv { panel, targets, .. } = &mut config.data {
            for p in [panel, targets] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
        if let Some(s) = o.strategy {
            self.strategies = vec![s];
        }
        if let Some(kind) = o.learner {
            let keep = self.learners.iter().find(|l| l.kind == kind).cloned();
            self.learners = vec![keep.unwrap_or_else(|| LearnerChoice::of(kind))];
        }
        if o.disable_gate {
            self.gate.threshold = ThresholdMode::Disabled;
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "config lists no seeds");
        ensure!(!self.learners.is_empty(), "config lists no learners");
        ensure!(!self.strategies.is_empty(), "config lists no similarity strategies");
        let kinds: BTreeSet<_> = self.learners.iter().map(|l| l.kind.short_name()).collect();
        ensure!(kinds.len() == self.learners.len(), "each learner kind may appear only once");
        let strategies: BTreeSet<_> = self.strategies.iter().map(|s| s.name()).collect();
        ensure!(strategies.len() == self.strategies.len(), "each strategy may appear only once");
        let seeds: BTreeSet<_> = self.seeds.iter().collect();
        ensure!(seeds.len() == self.seeds.len(), "seeds must be distinct");
        ensure!(self.backtest.rebalance_every > 0, "rebalance_every must be positive");
        ensure!(
            self.backtest.metrics.periods_per_year > 0.0 && self.backtest.metrics.periods_per_year.is_finite(),
            "periods_per_year must be positive"
        );
        let width = match &self.data {
            DataSource::Generate(g) => {
                g.schedule()?;
                g.features
            }
            DataSource::Csv { panel, targets, horizon } => {
                for p in [panel, targets] {
                    ensure!(p.is_file(), "data file {} does not exist", p.display());
                }
                ensure!(*horizon > 0, "horizon must be positive");
                0
            }
        };
        for l in &self.learners {
            l.spec(width.max(1), self.engine.seq_len, 0).validate()?;
        }
        for s in &self.strategies {
            self.engine_config(*s, width.max(1), 0).validate()?;
        }
        Ok(())
    }

    pub fn engine_config(&self, strategy: Strategy, input_width: usize, seed: u64) -> EngineConfig {
        let e = &self.engine;
        let sampler =
            if e.exhaustive_sampling { SamplerConfig::exhaustive() } else { SamplerConfig::new(e.samples, seed) };
        let autoencoder = strategy.uses_autoencoder().then(|| AeConfig {
            hidden_width: e.autoencoder.hidden_width.unwrap_or(input_width),
            sparsity_weight: e.autoencoder.sparsity_weight,
            epochs: e.autoencoder.epochs,
            learning_rate: e.autoencoder.learning_rate,
            seed,
        });
        EngineConfig {
            strategy,
            sampler,
            dtw_band: e.dtw_band,
            autoencoder,
            threshold: self.gate.threshold.clone(),
            grid_size: self.gate.grid_size,
            relearn_every: self.gate.relearn_every,
            capacity: self.gate.capacity,
            top_k: self.gate.top_k,
            window: e.window,
            seq_len: e.seq_len,
            max_history: e.max_history,
        }
    }

    /// Generator config used for `seed`, if the data are synthetic.
    pub fn generator_for(&self, seed: u64) -> Option<GeneratorConfig> {
        match &self.data {
            DataSource::Generate(g) => Some(GeneratorConfig { seed: g.seed.wrapping_add(seed), ..g.clone() }),
            DataSource::Csv { .. } => None,
        }
    }

    pub fn dataset(&self, seed: u64) -> Result<Dataset> {
        match &self.data {
            DataSource::Generate(_) => {
                let g = self.generator_for(seed).expect("generated source").generate()?;
                Ok(Dataset { panel: g.panel, targets: g.targets, regime_labels: Some(g.regime_labels) })
            }
            DataSource::Csv { panel, targets, horizon } => {
                let open = |p: &Path| fs::File::open(p).with_context(|| format!("opening {}", p.display()));
                let panel = read_panel_csv(open(panel)?)?;
                let targets = read_targets_csv(open(targets)?, *horizon)?;
                if panel.is_empty() {
                    bail!("panel CSV has no rows");
                }
                Ok(Dataset { panel, targets, regime_labels: None })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "data": {"generate": {
                "regimes": [
                    {"start": 0, "label": "A", "weights": [0.1, -0.1], "noise": 0.01},
                    {"start": 10, "label": "B", "weights": [-0.1, 0.1], "noise": 0.01}
                ],
                "entities": 20, "features": 2, "seed": 3, "steps": 20
            }},
            "learners": [{"kind": "ffnn"}],
            "strategies": ["ed", "warp-ae"],
            "seeds": [0, 1]
        }"#
    }

    #[test]
    fn parses_and_fills_defaults() {
        let c: ExperimentConfig = serde_json::from_str(minimal()).unwrap();
        assert_eq!(c.gate, GateSettings::default());
        assert_eq!(c.output, PathBuf::from("runs"));
        assert_eq!(c.strategies, vec![Strategy::Euclidean, Strategy::WarpAe]);
        c.validate().unwrap();
    }

    #[test]
    fn flags_override_config_keys() {
        let mut c: ExperimentConfig = serde_json::from_str(minimal()).unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            out: Some("elsewhere".into()),
            strategy: Some(Strategy::Dtw),
            learner: Some(LearnerKind::Linear),
            disable_gate: true,
        });
        assert_eq!(c.seeds, vec![9]);
        assert_eq!(c.output, PathBuf::from("elsewhere"));
        assert_eq!(c.strategies, vec![Strategy::Dtw]);
        assert_eq!(c.learners, vec![LearnerChoice::of(LearnerKind::Linear)]);
        assert_eq!(c.gate.threshold, ThresholdMode::Disabled);
    }

    #[test]
    fn rejects_duplicates_and_missing_files() {
        let mut c: ExperimentConfig = serde_json::from_str(minimal()).unwrap();
        c.seeds = vec![1, 1];
        assert!(c.validate().is_err());
        c.seeds = vec![1];
        c.data =
            DataSource::Csv { panel: "/nonexistent/p.csv".into(), targets: "/nonexistent/t.csv".into(), horizon: 1 };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("does not exist"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal().replace("\"seeds\"", "\"sedes\": [0], \"seeds\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn generator_seed_is_offset_by_run_seed() {
        let c: ExperimentConfig = serde_json::from_str(minimal()).unwrap();
        assert_eq!(c.generator_for(4).unwrap().seed, 7);
    }
}
