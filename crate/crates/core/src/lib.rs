//! Continual learning augmentation for cross-sectional time-series regression.
//!
//! A base learner is wrapped with an explicit memory of past
//! parameterizations. When the base learner's absolute forecast error spikes
//! above a learned threshold, its parameters and a representation of its
//! training data are stored as a memory column. Each step, every memory is
//! scored against the current cross-section with a dissimilarity strategy and
//! the forecasts of the base learner and all memories are mixed with weights
//! that favour the most similar contexts.
//!
//! Modules:
//! - [`panel`]: data model, synthetic regime generator, factor loadings, windows
//! - [`learners`]: linear, feed-forward and recurrent base learners, sparse autoencoder
//! - [`similarity`]: Euclidean, DTW, autoencoder and warp-AE dissimilarities
//! - [`engine`]: remember-gate, memory store, recall-gate and step protocol
//! - [`backtest`]: decile long/short simulation and performance metrics
//! - [`experiment`]: end-to-end run of one learner/strategy cell over a panel

pub mod backtest;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod learners;
pub mod matrix;
pub mod ols;
pub mod panel;
pub mod similarity;

pub use error::{ClaError, Result};
pub use matrix::FeatureMatrix;
pub use panel::{EntityId, Panel, TargetSeries, TimeId};
