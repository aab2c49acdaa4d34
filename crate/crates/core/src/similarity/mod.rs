//! Dissimilarity strategies used by the recall-gate to compare a memory's
//! context representation with the current cross-section.
//!
//! Euclidean and DTW compare randomly paired stored and current rows and
//! need the raw training rows. The autoencoder strategies only need the
//! memory's autoencoder: they measure how well it reconstructs the current
//! rows, either in Euclidean terms or through DTW.

mod dtw;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::learners::{train_autoencoder_traced, AeConfig, AeParams};
use crate::matrix::FeatureMatrix;
use crate::panel::TimeId;

pub use dtw::{dtw_kernel, dtw_kernel_banded, z_normalize};

/// Default number of sampled row pairs for Euclidean and DTW scoring.
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "ed")]
    Euclidean,
    #[serde(rename = "dtw")]
    Dtw,
    #[serde(rename = "ae")]
    Ae,
    #[serde(rename = "warp-ae")]
    WarpAe,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Self::Euclidean, Self::Dtw, Self::Ae, Self::WarpAe];

    pub fn name(self) -> &'static str {
        match self {
            Self::Euclidean => "ed",
            Self::Dtw => "dtw",
            Self::Ae => "ae",
            Self::WarpAe => "warp-ae",
        }
    }

    /// Whether memories for this strategy store an autoencoder instead of raw rows.
    pub fn uses_autoencoder(self) -> bool {
        matches!(self, Self::Ae | Self::WarpAe)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = ClaError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| ClaError::UnknownName { what: "similarity strategy", value: s.into() })
    }
}

/// Stand-in for a memory's training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ContextRepresentation {
    RawRows { rows: FeatureMatrix },
    Ae { params: AeParams },
}

impl ContextRepresentation {
    pub fn raw(rows: FeatureMatrix) -> Result<Self> {
        if rows.is_empty() {
            return Err(ClaError::Precondition("raw context representation needs rows".into()));
        }
        Ok(Self::RawRows { rows })
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::RawRows { .. } => "raw_rows",
            Self::Ae { .. } => "ae",
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Self::RawRows { rows } => rows.ncols(),
            Self::Ae { params } => params.input_width(),
        }
    }

    /// Builds the representation a strategy needs from training rows,
    /// training an autoencoder when required.
    pub fn build(strategy: Strategy, rows: &FeatureMatrix, ae: &AeConfig, trained_at: Option<TimeId>) -> Result<Self> {
        if strategy.uses_autoencoder() {
            let (params, _) = train_autoencoder_traced(rows, ae, trained_at)?;
            Ok(Self::Ae { params })
        } else {
            Self::raw(rows.clone())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Average over every (stored, current) pair instead of sampling.
    #[serde(default)]
    pub exhaustive: bool,
}

impl SamplerConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { n_samples, seed, exhaustive: false }
    }

    pub fn exhaustive() -> Self {
        Self { n_samples: 1, seed: 0, exhaustive: true }
    }

    /// Same sampler with a seed mixed from `stream`, for independent draws per (memory, step).
    pub fn with_stream(self, stream: u64) -> Self {
        Self { seed: mix_seed(self.seed, stream), ..self }
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLES, 0)
    }
}

/// SplitMix64 finalizer over `seed ^ stream`.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityScore {
    pub value: f64,
    pub strategy: Strategy,
    pub n_samples: usize,
}

fn raw_rows(repr: &ContextRepresentation, strategy: Strategy) -> Result<&FeatureMatrix> {
    match repr {
        ContextRepresentation::RawRows { rows } => Ok(rows),
        other => {
            Err(ClaError::WrongRepresentation { strategy: strategy.name().into(), found: other.variant_name().into() })
        }
    }
}

fn ae_params(repr: &ContextRepresentation, strategy: Strategy) -> Result<&AeParams> {
    match repr {
        ContextRepresentation::Ae { params } => Ok(params),
        other => {
            Err(ClaError::WrongRepresentation { strategy: strategy.name().into(), found: other.variant_name().into() })
        }
    }
}

fn check_current(current: &FeatureMatrix, width: usize) -> Result<()> {
    if current.is_empty() {
        return Err(ClaError::Precondition("current cross-section is empty".into()));
    }
    if current.ncols() != width {
        return Err(ClaError::WidthMismatch { expected: width, found: current.ncols() });
    }
    Ok(())
}

fn finite(value: f64, strategy: Strategy, n_samples: usize) -> Result<DissimilarityScore> {
    if !value.is_finite() {
        return Err(ClaError::NonFinite(format!("{strategy} dissimilarity")));
    }
    Ok(DissimilarityScore { value, strategy, n_samples })
}

/// Mean of `dist` over sampled (stored row, current row) index pairs. Each
/// draw takes the stored index first, then the current index.
fn sampled_mean<F>(
    stored: &FeatureMatrix,
    current: &FeatureMatrix,
    sampler: &SamplerConfig,
    mut dist: F,
) -> Result<(f64, usize)>
where
    F: FnMut(usize, usize) -> f64,
{
    if sampler.exhaustive {
        let mut total = 0.0;
        for i in 0..stored.nrows() {
            for j in 0..current.nrows() {
                total += dist(i, j);
            }
        }
        let n = stored.nrows() * current.nrows();
        return Ok((total / n as f64, n));
    }
    if sampler.n_samples == 0 {
        return Err(ClaError::Precondition("sampler needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut total = 0.0;
    for _ in 0..sampler.n_samples {
        let r1 = rng.random_range(0..stored.nrows());
        let r2 = rng.random_range(0..current.nrows());
        total += dist(r1, r2);
    }
    Ok((total / sampler.n_samples as f64, sampler.n_samples))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean Euclidean distance between randomly paired stored and current rows.
pub fn euclidean_dissimilarity(
    memory_repr: &ContextRepresentation,
    current: &FeatureMatrix,
    sampler: &SamplerConfig,
) -> Result<DissimilarityScore> {
    let stored = raw_rows(memory_repr, Strategy::Euclidean)?;
    check_current(current, stored.ncols())?;
    let (v, n) = sampled_mean(stored, current, sampler, |i, j| euclid(stored.row(i), current.row(j)))?;
    finite(v, Strategy::Euclidean, n)
}

/// Mean DTW distance between randomly paired, per-row z-normalized stored
/// and current rows, each row read as a sequence along the feature axis.
pub fn dtw_dissimilarity(
    memory_repr: &ContextRepresentation,
    current: &FeatureMatrix,
    sampler: &SamplerConfig,
    band: Option<usize>,
) -> Result<DissimilarityScore> {
    let stored = raw_rows(memory_repr, Strategy::Dtw)?;
    check_current(current, stored.ncols())?;
    let (v, n) = sampled_mean(stored, current, sampler, |i, j| {
        dtw::dtw_unchecked(&z_normalize(stored.row(i)), &z_normalize(current.row(j)), band)
    })?;
    finite(v, Strategy::Dtw, n)
}

/// Mean per-row Euclidean reconstruction error of the current rows under
/// the memory's autoencoder.
pub fn ae_dissimilarity(memory_repr: &ContextRepresentation, current: &FeatureMatrix) -> Result<DissimilarityScore> {
    let ae = ae_params(memory_repr, Strategy::Ae)?;
    check_current(current, ae.input_width())?;
    let rec = ae.reconstruct(current)?;
    ae_style(current, &rec, Strategy::Ae, euclid)
}

/// Mean per-row DTW distance between the current rows and their
/// reconstructions under the memory's autoencoder (no normalization).
pub fn warp_ae_dissimilarity(
    memory_repr: &ContextRepresentation,
    current: &FeatureMatrix,
    band: Option<usize>,
) -> Result<DissimilarityScore> {
    let ae = ae_params(memory_repr, Strategy::WarpAe)?;
    check_current(current, ae.input_width())?;
    let rec = ae.reconstruct(current)?;
    ae_style(current, &rec, Strategy::WarpAe, |a, b| dtw::dtw_unchecked(a, b, band))
}

/// `(1/N) * sum_rows dist(row, reconstructed row)` with `N` the row count.
pub fn reconstruction_dissimilarity<F>(
    current: &FeatureMatrix,
    reconstructed: &FeatureMatrix,
    strategy: Strategy,
    dist: F,
) -> Result<DissimilarityScore>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if current.nrows() != reconstructed.nrows() || current.ncols() != reconstructed.ncols() {
        return Err(ClaError::WidthMismatch { expected: current.ncols(), found: reconstructed.ncols() });
    }
    ae_style(current, reconstructed, strategy, dist)
}

fn ae_style<F>(current: &FeatureMatrix, rec: &FeatureMatrix, strategy: Strategy, dist: F) -> Result<DissimilarityScore>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = current.nrows();
    let total: f64 = current.iter_rows().zip(rec.iter_rows()).map(|(a, b)| dist(a, b)).sum();
    finite(total / n as f64, strategy, n)
}

/// A configured strategy, ready to score any representation against a cross-section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub strategy: Strategy,
    pub sampler: SamplerConfig,
    /// Optional Sakoe-Chiba half-width for the DTW-based strategies.
    pub band: Option<usize>,
}

impl Scorer {
    pub fn new(strategy: Strategy, sampler: SamplerConfig) -> Self {
        Self { strategy, sampler, band: None }
    }

    /// Scores with the sampler seed mixed from `stream`.
    pub fn score(
        &self,
        repr: &ContextRepresentation,
        current: &FeatureMatrix,
        stream: u64,
    ) -> Result<DissimilarityScore> {
        let sampler = self.sampler.with_stream(stream);
        match self.strategy {
            Strategy::Euclidean => euclidean_dissimilarity(repr, current, &sampler),
            Strategy::Dtw => dtw_dissimilarity(repr, current, &sampler, self.band),
            Strategy::Ae => ae_dissimilarity(repr, current),
            Strategy::WarpAe => warp_ae_dissimilarity(repr, current, self.band),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn three_four_five() {
        let repr = ContextRepresentation::raw(m(&[vec![3.0, 4.0]])).unwrap();
        let s = euclidean_dissimilarity(&repr, &m(&[vec![0.0, 0.0]]), &SamplerConfig::new(7, 1)).unwrap();
        assert_eq!(s.value, 5.0);
        assert_eq!(s.n_samples, 7);
    }

    #[test]
    fn identical_single_rows_score_zero() {
        let row = m(&[vec![0.3, -1.0, 2.0]]);
        let repr = ContextRepresentation::raw(row.clone()).unwrap();
        assert_eq!(euclidean_dissimilarity(&repr, &row, &SamplerConfig::new(1, 4)).unwrap().value, 0.0);
        assert_eq!(dtw_dissimilarity(&repr, &row, &SamplerConfig::new(1, 4), None).unwrap().value, 0.0);
    }

    #[test]
    fn wrong_variant_is_rejected() {
        let repr = ContextRepresentation::raw(m(&[vec![1.0]])).unwrap();
        let err = ae_dissimilarity(&repr, &m(&[vec![1.0]]));
        assert!(matches!(err, Err(ClaError::WrongRepresentation { .. })));
        let ae = ContextRepresentation::Ae {
            params: AeParams::from_values(1, 1, 0.0, vec![1.0, 0.0, 1.0, 0.0], None).unwrap(),
        };
        assert!(euclidean_dissimilarity(&ae, &m(&[vec![1.0]]), &SamplerConfig::default()).is_err());
        assert!(dtw_dissimilarity(&ae, &m(&[vec![1.0]]), &SamplerConfig::default(), None).is_err());
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let repr = ContextRepresentation::raw(m(&[vec![1.0, 2.0]])).unwrap();
        let err = euclidean_dissimilarity(&repr, &m(&[vec![1.0]]), &SamplerConfig::default());
        assert!(matches!(err, Err(ClaError::WidthMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("cosine".parse::<Strategy>().is_err());
    }

    #[test]
    fn identity_autoencoder_scores_zero() {
        // one positive input, hidden = relu(x), decoder copies it back
        let ae = AeParams::from_values(1, 1, 0.0, vec![1.0, 0.0, 1.0, 0.0], None).unwrap();
        let repr = ContextRepresentation::Ae { params: ae };
        let cur = m(&[vec![0.5], vec![2.0]]);
        assert_eq!(ae_dissimilarity(&repr, &cur).unwrap().value, 0.0);
        assert_eq!(warp_ae_dissimilarity(&repr, &cur, None).unwrap().value, 0.0);
    }
}
