//! Base learners and the sparse autoencoder, all trained from scratch with
//! full-batch gradient descent (or closed-form OLS for the linear kind).

pub mod autoencoder;
mod descent;
mod init;
pub mod lstm;
pub mod mlp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;
use crate::ols::fit_with_intercept;
use crate::panel::{TimeId, TrainingSet};

pub use autoencoder::{train_autoencoder, train_autoencoder_traced, AeConfig, AeLoss, AeParams};
pub use descent::LossTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    /// Sliding-window feed-forward network.
    #[serde(alias = "ffnn")]
    Feedforward,
    /// Sequential gated recurrent network trained on the full history.
    #[serde(alias = "lstm")]
    Recurrent,
    Linear,
}

impl LearnerKind {
    /// Short CLI name.
    pub fn short_name(self) -> &'static str {
        match self {
            Self::Feedforward => "ffnn",
            Self::Recurrent => "lstm",
            Self::Linear => "linear",
        }
    }

    /// Whether the learner consumes per-entity histories.
    pub fn is_sequential(self) -> bool {
        self == Self::Recurrent
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for LearnerKind {
    type Err = ClaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ffnn" | "feedforward" => Ok(Self::Feedforward),
            "lstm" | "recurrent" => Ok(Self::Recurrent),
            "linear" => Ok(Self::Linear),
            other => Err(ClaError::UnknownName { what: "learner", value: other.into() }),
        }
    }
}

/// Architecture and training hyperparameters of a base learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// Hidden layer widths. The recurrent kind uses a single layer.
    #[serde(default)]
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub input_width: usize,
    /// Longest entity history fed to the recurrent kind.
    #[serde(default = "default_seq_len")]
    pub seq_len: usize,
}

fn default_seq_len() -> usize {
    4
}

impl LearnerSpec {
    /// `[K, 2K, 1]` tanh network.
    pub fn feedforward(input_width: usize, seed: u64) -> Self {
        Self {
            kind: LearnerKind::Feedforward,
            layer_sizes: vec![2 * input_width],
            learning_rate: 0.1,
            epochs: 400,
            seed,
            input_width,
            seq_len: default_seq_len(),
        }
    }

    /// Single gated cell with hidden width `2K`.
    pub fn recurrent(input_width: usize, seed: u64) -> Self {
        Self {
            kind: LearnerKind::Recurrent,
            layer_sizes: vec![2 * input_width],
            learning_rate: 0.1,
            epochs: 150,
            seed,
            input_width,
            seq_len: default_seq_len(),
        }
    }

    pub fn linear(input_width: usize) -> Self {
        Self {
            kind: LearnerKind::Linear,
            layer_sizes: Vec::new(),
            learning_rate: 1.0,
            epochs: 1,
            seed: 0,
            input_width,
            seq_len: 1,
        }
    }

    /// Default spec for a kind at input width `k`.
    pub fn default_for(kind: LearnerKind, k: usize, seed: u64) -> Self {
        match kind {
            LearnerKind::Feedforward => Self::feedforward(k, seed),
            LearnerKind::Recurrent => Self::recurrent(k, seed),
            LearnerKind::Linear => Self::linear(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 {
            return Err(ClaError::Precondition("input width must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ClaError::Precondition("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(ClaError::Precondition("epochs must be at least 1".into()));
        }
        match self.kind {
            LearnerKind::Linear => {}
            LearnerKind::Feedforward | LearnerKind::Recurrent => {
                if self.layer_sizes.is_empty() || self.layer_sizes.contains(&0) {
                    return Err(ClaError::Precondition("neural learners need nonzero hidden layer sizes".into()));
                }
                if self.kind == LearnerKind::Recurrent && (self.layer_sizes.len() != 1 || self.seq_len == 0) {
                    return Err(ClaError::Precondition(
                        "recurrent learner takes exactly one hidden layer and a positive seq_len".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Full `[K, hidden..., 1]` feed-forward layer list.
    fn mlp_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width];
        s.extend(&self.layer_sizes);
        s.push(1);
        s
    }

    /// Training loss and analytic gradient at `params`; exposed for gradient checks.
    pub fn loss_and_grad(&self, params: &[f64], set: &TrainingSet) -> Result<(f64, Vec<f64>)> {
        match self.kind {
            LearnerKind::Feedforward => Ok(mlp::loss_and_grad(&self.mlp_sizes(), params, &set.rows, &set.targets)),
            LearnerKind::Recurrent => {
                let seqs = set
                    .sequences
                    .as_ref()
                    .ok_or_else(|| ClaError::Precondition("recurrent learner needs sequence histories".into()))?;
                Ok(lstm::loss_and_grad(self.input_width, self.layer_sizes[0], params, seqs, &set.targets))
            }
            LearnerKind::Linear => Err(ClaError::Precondition("linear learner is fit in closed form".into())),
        }
    }

    /// Initial parameter vector for the neural kinds.
    pub fn init_params(&self) -> Vec<f64> {
        match self.kind {
            LearnerKind::Feedforward => mlp::init_params(&self.mlp_sizes(), self.seed),
            LearnerKind::Recurrent => lstm::init_params(self.input_width, self.layer_sizes[0], self.seed),
            LearnerKind::Linear => vec![0.0; self.input_width + 1],
        }
    }
}

/// Immutable copy of a trained learner's parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    kind: LearnerKind,
    /// Linear: `[K]`. Feedforward: `[K, hidden..., 1]`. Recurrent: `[K, H]`.
    shapes: Vec<usize>,
    /// Linear: intercept then slopes. Neural kinds: see [`mlp`] and [`lstm`].
    values: Vec<f64>,
    training_time_id: Option<TimeId>,
}

impl ParamSnapshot {
    pub fn new(
        kind: LearnerKind,
        shapes: Vec<usize>,
        values: Vec<f64>,
        training_time_id: Option<TimeId>,
    ) -> Result<Self> {
        let s = Self { kind, shapes, values, training_time_id };
        s.validate()?;
        Ok(s)
    }

    /// Linear snapshot `y = intercept + weights . x`.
    pub fn linear(intercept: f64, weights: &[f64], training_time_id: Option<TimeId>) -> Self {
        let mut values = Vec::with_capacity(weights.len() + 1);
        values.push(intercept);
        values.extend_from_slice(weights);
        Self { kind: LearnerKind::Linear, shapes: vec![weights.len()], values, training_time_id }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            LearnerKind::Linear if self.shapes.len() == 1 => self.shapes[0] + 1,
            LearnerKind::Feedforward if self.shapes.len() >= 2 && self.shapes.last() == Some(&1) => {
                mlp::param_count(&self.shapes)
            }
            LearnerKind::Recurrent if self.shapes.len() == 2 => lstm::param_count(self.shapes[0], self.shapes[1]),
            _ => return Err(ClaError::Malformed(format!("bad shapes {:?} for {}", self.shapes, self.kind))),
        };
        if self.values.len() != expected || self.shapes.contains(&0) {
            return Err(ClaError::Malformed(format!(
                "{} snapshot with shapes {:?} needs {expected} values, got {}",
                self.kind,
                self.shapes,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(ClaError::NonFinite("snapshot parameters".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn shapes(&self) -> &[usize] {
        &self.shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn training_time_id(&self) -> Option<&TimeId> {
        self.training_time_id.as_ref()
    }

    pub fn input_width(&self) -> usize {
        self.shapes[0]
    }

    fn check_width(&self, found: usize) -> Result<()> {
        if found != self.input_width() {
            return Err(ClaError::WidthMismatch { expected: self.input_width(), found });
        }
        Ok(())
    }

    /// One forecast per row. The recurrent kind sees each row as a
    /// length-one history.
    pub fn predict(&self, rows: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_width(rows.ncols())?;
        Ok(match self.kind {
            LearnerKind::Linear => rows.iter_rows().map(|x| self.linear_row(x)).collect(),
            LearnerKind::Feedforward => {
                rows.iter_rows().map(|x| mlp::predict_row(&self.shapes, &self.values, x)).collect()
            }
            LearnerKind::Recurrent => {
                let (k, h) = (self.shapes[0], self.shapes[1]);
                rows.iter_rows()
                    .map(|x| {
                        let one = FeatureMatrix::new(1, k, x.to_vec()).expect("width checked");
                        lstm::predict_sequence(k, h, &self.values, &one)
                    })
                    .collect()
            }
        })
    }

    /// One forecast per entity history. Non-sequential kinds use the last row.
    pub fn predict_sequences(&self, seqs: &[FeatureMatrix]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(seqs.len());
        for s in seqs {
            self.check_width(s.ncols())?;
            if s.is_empty() {
                return Err(ClaError::EmptySequence);
            }
            let last = s.row(s.nrows() - 1);
            out.push(match self.kind {
                LearnerKind::Linear => self.linear_row(last),
                LearnerKind::Feedforward => mlp::predict_row(&self.shapes, &self.values, last),
                LearnerKind::Recurrent => lstm::predict_sequence(self.shapes[0], self.shapes[1], &self.values, s),
            });
        }
        Ok(out)
    }

    /// Dispatches to [`predict_sequences`](Self::predict_sequences) when
    /// histories are supplied and the kind uses them.
    pub fn forecast(&self, rows: &FeatureMatrix, sequences: Option<&[FeatureMatrix]>) -> Result<Vec<f64>> {
        match (self.kind, sequences) {
            (LearnerKind::Recurrent, Some(seqs)) => {
                if seqs.len() != rows.nrows() {
                    return Err(ClaError::Malformed("one history per row required".into()));
                }
                self.predict_sequences(seqs)
            }
            _ => self.predict(rows),
        }
    }

    fn linear_row(&self, x: &[f64]) -> f64 {
        self.values[0] + self.values[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: Self = serde_json::from_str(s)?;
        snap.validate()?;
        Ok(snap)
    }
}

/// Something that turns a training set into a parameter snapshot.
///
/// Fitting must be a pure function of its inputs so that a run can be
/// replayed exactly.
pub trait Learner: Send + Sync {
    fn fit(&self, set: &TrainingSet, trained_at: &TimeId) -> Result<ParamSnapshot>;

    /// Whether training and prediction use per-entity histories.
    fn is_sequential(&self) -> bool {
        false
    }
}

impl Learner for LearnerSpec {
    fn fit(&self, set: &TrainingSet, trained_at: &TimeId) -> Result<ParamSnapshot> {
        train_traced(self, set, Some(trained_at.clone())).map(|(s, _)| s)
    }

    fn is_sequential(&self) -> bool {
        self.kind.is_sequential()
    }
}

pub fn train(spec: &LearnerSpec, set: &TrainingSet) -> Result<ParamSnapshot> {
    train_traced(spec, set, None).map(|(s, _)| s)
}

/// Trains and reports the training loss before and after optimisation.
/// For the linear kind both entries are the fitted mean squared error.
pub fn train_traced(
    spec: &LearnerSpec,
    set: &TrainingSet,
    trained_at: Option<TimeId>,
) -> Result<(ParamSnapshot, LossTrace)> {
    spec.validate()?;
    if set.is_empty() {
        return Err(ClaError::EmptyTrainingSet);
    }
    if set.width() != spec.input_width {
        return Err(ClaError::WidthMismatch { expected: spec.input_width, found: set.width() });
    }
    match spec.kind {
        LearnerKind::Linear => {
            let (a, w) = fit_with_intercept(&set.rows, &set.targets)?;
            let snap = ParamSnapshot::linear(a, &w, trained_at);
            let pred = snap.predict(&set.rows)?;
            let mse = pred.iter().zip(&set.targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / set.len() as f64;
            Ok((snap, LossTrace { initial: mse, final_loss: mse, epochs_run: 0 }))
        }
        LearnerKind::Feedforward | LearnerKind::Recurrent => {
            if spec.kind == LearnerKind::Recurrent && set.sequences.is_none() {
                return Err(ClaError::Precondition("recurrent learner needs sequence histories".into()));
            }
            let mut params = spec.init_params();
            let trace = descend_spec(spec, set, &mut params);
            let shapes = match spec.kind {
                LearnerKind::Feedforward => spec.mlp_sizes(),
                _ => vec![spec.input_width, spec.layer_sizes[0]],
            };
            Ok((ParamSnapshot::new(spec.kind, shapes, params, trained_at)?, trace))
        }
    }
}

fn descend_spec(spec: &LearnerSpec, set: &TrainingSet, params: &mut Vec<f64>) -> LossTrace {
    descent::descend(params, spec.learning_rate, spec.epochs, |p| {
        spec.loss_and_grad(p, set).expect("kind and sequences checked by caller")
    })
}
