//! Sparse autoencoder: ReLU encoder, linear decoder, mean squared
//! reconstruction loss plus an L1 penalty on hidden activations.
//!
//! Parameter layout: encoder weights (`H x K`), encoder bias (`H`), decoder
//! weights (`K x H`), decoder bias (`K`).

use serde::{Deserialize, Serialize};

use super::descent::{descend, LossTrace};
use super::init::{glorot, rng};
use crate::error::{ClaError, Result};
use crate::matrix::FeatureMatrix;
use crate::panel::TimeId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub hidden_width: usize,
    pub sparsity_weight: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl AeConfig {
    pub fn new(hidden_width: usize, sparsity_weight: f64, epochs: usize, seed: u64) -> Self {
        Self { hidden_width, sparsity_weight, epochs, learning_rate: 0.05, seed }
    }
}

/// Trained autoencoder parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "autoencoder")]
pub struct AeParams {
    /// `[input_width, hidden_width]`
    shapes: [usize; 2],
    sparsity_weight: f64,
    values: Vec<f64>,
    training_time_id: Option<TimeId>,
}

/// Loss components on a data set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeLoss {
    pub reconstruction: f64,
    pub sparsity: f64,
    pub total: f64,
}

pub fn param_count(k: usize, h: usize) -> usize {
    2 * k * h + h + k
}

impl AeParams {
    pub fn from_values(
        input_width: usize,
        hidden_width: usize,
        sparsity_weight: f64,
        values: Vec<f64>,
        training_time_id: Option<TimeId>,
    ) -> Result<Self> {
        let p = Self { shapes: [input_width, hidden_width], sparsity_weight, values, training_time_id };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let [k, h] = self.shapes;
        if k == 0 || h == 0 {
            return Err(ClaError::Malformed("autoencoder widths must be positive".into()));
        }
        if self.values.len() != param_count(k, h) {
            return Err(ClaError::Malformed(format!(
                "autoencoder {k}x{h} needs {} values, got {}",
                param_count(k, h),
                self.values.len()
            )));
        }
        if !(self.sparsity_weight.is_finite() && self.sparsity_weight >= 0.0) {
            return Err(ClaError::Malformed("sparsity weight must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.shapes[0]
    }

    pub fn hidden_width(&self) -> usize {
        self.shapes[1]
    }

    pub fn sparsity_weight(&self) -> f64 {
        self.sparsity_weight
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn training_time_id(&self) -> Option<&TimeId> {
        self.training_time_id.as_ref()
    }

    fn check_width(&self, rows: &FeatureMatrix) -> Result<()> {
        if rows.ncols() != self.input_width() {
            return Err(ClaError::WidthMismatch { expected: self.input_width(), found: rows.ncols() });
        }
        Ok(())
    }

    pub fn encode(&self, rows: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_width(rows)?;
        let [k, h] = self.shapes;
        let mut out = FeatureMatrix::with_cols(h);
        let mut hid = vec![0.0; h];
        for x in rows.iter_rows() {
            encode_row(k, h, &self.values, x, &mut hid);
            out.push_row(&hid)?;
        }
        Ok(out)
    }

    /// `decode(encode(rows))`, one output row per input row.
    pub fn reconstruct(&self, rows: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_width(rows)?;
        let [k, h] = self.shapes;
        let mut out = FeatureMatrix::with_cols(k);
        let mut hid = vec![0.0; h];
        let mut rec = vec![0.0; k];
        for x in rows.iter_rows() {
            encode_row(k, h, &self.values, x, &mut hid);
            decode_row(k, h, &self.values, &hid, &mut rec);
            out.push_row(&rec)?;
        }
        Ok(out)
    }

    pub fn loss(&self, rows: &FeatureMatrix) -> Result<AeLoss> {
        self.check_width(rows)?;
        let [k, h] = self.shapes;
        Ok(loss_parts(k, h, self.sparsity_weight, &self.values, rows))
    }

    /// Mean absolute hidden activation over `rows`.
    pub fn mean_activation(&self, rows: &FeatureMatrix) -> Result<f64> {
        let enc = self.encode(rows)?;
        Ok(enc.as_slice().iter().map(|v| v.abs()).sum::<f64>() / enc.as_slice().len().max(1) as f64)
    }
}

fn encode_row(k: usize, h: usize, p: &[f64], x: &[f64], out: &mut [f64]) {
    let b = &p[h * k..h * k + h];
    for j in 0..h {
        let z = b[j] + p[j * k..(j + 1) * k].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        out[j] = z.max(0.0);
    }
}

fn decode_row(k: usize, h: usize, p: &[f64], hid: &[f64], out: &mut [f64]) {
    let off = h * k + h;
    let b = &p[off + k * h..off + k * h + k];
    for i in 0..k {
        out[i] = b[i] + p[off + i * h..off + (i + 1) * h].iter().zip(hid).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn loss_parts(k: usize, h: usize, lambda: f64, p: &[f64], rows: &FeatureMatrix) -> AeLoss {
    let n = rows.nrows() as f64;
    let mut hid = vec![0.0; h];
    let mut rec = vec![0.0; k];
    let (mut sq, mut act) = (0.0, 0.0);
    for x in rows.iter_rows() {
        encode_row(k, h, p, x, &mut hid);
        decode_row(k, h, p, &hid, &mut rec);
        sq += x.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        act += hid.iter().sum::<f64>();
    }
    let reconstruction = sq / (n * k as f64);
    let sparsity = if lambda == 0.0 { 0.0 } else { lambda * act / (n * h as f64) };
    AeLoss { reconstruction, sparsity, total: reconstruction + sparsity }
}

/// Total loss and its gradient with respect to the flat parameter vector.
pub fn loss_and_grad(k: usize, h: usize, lambda: f64, p: &[f64], rows: &FeatureMatrix) -> (f64, Vec<f64>) {
    let n = rows.nrows() as f64;
    let mut grad = vec![0.0; p.len()];
    let mut hid = vec![0.0; h];
    let mut rec = vec![0.0; k];
    let mut dhid = vec![0.0; h];
    let (mut sq, mut act) = (0.0, 0.0);
    let enc_b = h * k;
    let dec = h * k + h;
    let dec_b = dec + k * h;
    let rec_scale = 2.0 / (n * k as f64);
    let sparse_scale = lambda / (n * h as f64);
    for x in rows.iter_rows() {
        encode_row(k, h, p, x, &mut hid);
        decode_row(k, h, p, &hid, &mut rec);
        dhid.iter_mut().for_each(|d| *d = 0.0);
        for i in 0..k {
            let e = rec[i] - x[i];
            sq += e * e;
            let d = rec_scale * e;
            grad[dec_b + i] += d;
            for j in 0..h {
                grad[dec + i * h + j] += d * hid[j];
                dhid[j] += d * p[dec + i * h + j];
            }
        }
        for j in 0..h {
            act += hid[j];
            if hid[j] <= 0.0 {
                continue;
            }
            let dz = dhid[j] + sparse_scale;
            grad[enc_b + j] += dz;
            for i in 0..k {
                grad[j * k + i] += dz * x[i];
            }
        }
    }
    let total = sq / (n * k as f64) + if lambda == 0.0 { 0.0 } else { lambda * act / (n * h as f64) };
    (total, grad)
}

pub fn init_params(k: usize, h: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut p = vec![0.0; param_count(k, h)];
    glorot(&mut rng, &mut p[..h * k], k, h);
    // small positive encoder bias keeps units alive at the start
    for b in &mut p[h * k..h * k + h] {
        *b = 0.1;
    }
    let dec = h * k + h;
    glorot(&mut rng, &mut p[dec..dec + k * h], h, k);
    p
}

/// Trains an autoencoder on `rows` and reports the loss before and after.
pub fn train_autoencoder_traced(
    rows: &FeatureMatrix,
    config: &AeConfig,
    training_time_id: Option<TimeId>,
) -> Result<(AeParams, LossTrace)> {
    if rows.is_empty() {
        return Err(ClaError::EmptyTrainingSet);
    }
    if config.hidden_width == 0 {
        return Err(ClaError::Precondition("autoencoder hidden width must be at least 1".into()));
    }
    if !(config.sparsity_weight.is_finite() && config.sparsity_weight >= 0.0) {
        return Err(ClaError::Precondition("sparsity weight must be finite and nonnegative".into()));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(ClaError::Precondition("learning rate must be positive".into()));
    }
    let (k, h) = (rows.ncols(), config.hidden_width);
    let mut params = init_params(k, h, config.seed);
    let trace = descend(&mut params, config.learning_rate, config.epochs, |p| {
        loss_and_grad(k, h, config.sparsity_weight, p, rows)
    });
    let ae = AeParams::from_values(k, h, config.sparsity_weight, params, training_time_id)?;
    Ok((ae, trace))
}

pub fn train_autoencoder(rows: &FeatureMatrix, config: &AeConfig) -> Result<AeParams> {
    train_autoencoder_traced(rows, config, None).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn low_rank(n: usize) -> FeatureMatrix {
        // rank-2 data in 4 dimensions
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = ((i * 7919) % 101) as f64 / 50.0 - 1.0;
                let b = ((i * 104729) % 97) as f64 / 48.0 - 1.0;
                vec![a + b, a - b, 0.5 * a, 2.0 * b]
            })
            .collect();
        FeatureMatrix::from_rows(&rows).unwrap()
    }

    fn variance(m: &FeatureMatrix) -> f64 {
        let v = m.as_slice();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn learns_low_rank_data() {
        let data = low_rank(120);
        let cfg = AeConfig { hidden_width: 4, sparsity_weight: 0.0, epochs: 3000, learning_rate: 0.05, seed: 3 };
        let (ae, trace) = train_autoencoder_traced(&data, &cfg, None).unwrap();
        assert!(trace.final_loss <= trace.initial);
        let l = ae.loss(&data).unwrap();
        assert!(l.reconstruction < 0.1 * variance(&data), "{} vs {}", l.reconstruction, variance(&data));
        assert_eq!(ae.reconstruct(&data).unwrap().nrows(), data.nrows());
    }

    #[test]
    fn zero_sparsity_means_total_is_reconstruction() {
        let data = low_rank(30);
        let ae = train_autoencoder(&data, &AeConfig::new(3, 0.0, 10, 1)).unwrap();
        let l = ae.loss(&data).unwrap();
        assert_eq!(l.sparsity, 0.0);
        assert_eq!(l.total, l.reconstruction);
    }

    #[test]
    fn sparsity_penalty_shrinks_activations() {
        let data = low_rank(80);
        let dense = train_autoencoder(&data, &AeConfig::new(4, 0.0, 800, 9)).unwrap();
        let sparse = train_autoencoder(&data, &AeConfig::new(4, 5.0, 800, 9)).unwrap();
        assert!(sparse.mean_activation(&data).unwrap() <= dense.mean_activation(&data).unwrap());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            train_autoencoder(&FeatureMatrix::with_cols(3), &AeConfig::new(2, 0.0, 5, 0)),
            Err(ClaError::EmptyTrainingSet)
        ));
        let ae = train_autoencoder(&low_rank(10), &AeConfig::new(2, 0.0, 5, 0)).unwrap();
        assert!(matches!(
            ae.reconstruct(&FeatureMatrix::zeros(2, 3)),
            Err(ClaError::WidthMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn json_is_self_describing() {
        let ae = train_autoencoder(&low_rank(10), &AeConfig::new(2, 0.1, 5, 0)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&ae).unwrap();
        assert_eq!(v["kind"], "autoencoder");
        assert_eq!(v["shapes"], serde_json::json!([4, 2]));
        let back: AeParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, ae);
    }
}
