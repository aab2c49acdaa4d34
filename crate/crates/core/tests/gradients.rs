//! Analytic gradients against central differences on toy instances.

use cla_core::learners::{autoencoder, lstm, mlp, LearnerSpec};
use cla_core::panel::TrainingSet;
use cla_core::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-4;
/// Gradient components below this magnitude are compared absolutely.
const FLOOR: f64 = 1e-6;

fn rows(rng: &mut ChaCha8Rng, n: usize, k: usize) -> FeatureMatrix {
    let r: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    FeatureMatrix::from_rows(&r).unwrap()
}

fn check<F: Fn(&[f64]) -> (f64, Vec<f64>)>(name: &str, params: &[f64], f: F) {
    let (_, grad) = f(params);
    assert_eq!(grad.len(), params.len(), "{name}: gradient length");
    let mut worst = 0.0_f64;
    for i in 0..params.len() {
        let mut p = params.to_vec();
        p[i] = params[i] + STEP;
        let up = f(&p).0;
        p[i] = params[i] - STEP;
        let down = f(&p).0;
        let numeric = (up - down) / (2.0 * STEP);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
        assert!(rel <= REL_TOL, "{name}: component {i} analytic {} numeric {numeric} rel {rel:e}", grad[i]);
    }
    assert!(worst <= REL_TOL);
}

#[test]
fn feedforward_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sizes in [vec![3, 5, 1], vec![4, 6, 3, 1]] {
        let x = rows(&mut rng, 9, sizes[0]);
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-0.5..0.5)).collect();
        let p: Vec<f64> = (0..mlp::param_count(&sizes)).map(|_| rng.random_range(-0.8..0.8)).collect();
        check("feedforward", &p, |q| mlp::loss_and_grad(&sizes, q, &x, &y));
    }
}

#[test]
fn recurrent_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (k, h) = (3, 4);
    let seqs: Vec<FeatureMatrix> = (1..=5).map(|len| rows(&mut rng, len, k)).collect();
    let y: Vec<f64> = (0..5).map(|_| rng.random_range(-0.5..0.5)).collect();
    let p: Vec<f64> = (0..lstm::param_count(k, h)).map(|_| rng.random_range(-0.6..0.6)).collect();
    check("recurrent", &p, |q| lstm::loss_and_grad(k, h, q, &seqs, &y));
}

#[test]
fn recurrent_gradient_through_spec() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let spec = LearnerSpec::recurrent(2, 5);
    let seqs: Vec<FeatureMatrix> = (0..6).map(|i| rows(&mut rng, 1 + i % 3, 2)).collect();
    let last: Vec<Vec<f64>> = seqs.iter().map(|s| s.row(s.nrows() - 1).to_vec()).collect();
    let set = TrainingSet {
        rows: FeatureMatrix::from_rows(&last).unwrap(),
        targets: (0..6).map(|i| 0.1 * i as f64 - 0.2).collect(),
        sequences: Some(seqs),
        feature_index: vec![0; 6],
    };
    let p = spec.init_params();
    check("recurrent spec", &p, |q| spec.loss_and_grad(q, &set).unwrap());
}

#[test]
fn autoencoder_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (k, h) = (4, 3);
    let x = rows(&mut rng, 7, k);
    for lambda in [0.0, 1e-2] {
        let p: Vec<f64> = (0..autoencoder::param_count(k, h)).map(|_| rng.random_range(-0.7..0.7)).collect();
        check("autoencoder", &p, |q| autoencoder::loss_and_grad(k, h, lambda, q, &x));
    }
}
