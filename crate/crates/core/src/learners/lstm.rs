//! Single-layer gated recurrent cell (LSTM) read out linearly from the final
//! hidden state, trained by backpropagation through time.
//!
//! Parameter layout: gate weights `W` (`4H x (K+H)`, row-major, gate blocks
//! in the order input, forget, candidate, output), gate biases (`4H`), output
//! weights (`H`), output bias (`1`).

use super::init::{glorot, rng};
use crate::matrix::FeatureMatrix;

pub fn param_count(k: usize, h: usize) -> usize {
    4 * h * (k + h) + 4 * h + h + 1
}

pub fn init_params(k: usize, h: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut p = vec![0.0; param_count(k, h)];
    let nw = 4 * h * (k + h);
    glorot(&mut rng, &mut p[..nw], k + h, 4 * h);
    // forget-gate bias of one keeps early gradients flowing through the cell
    for b in &mut p[nw + h..nw + 2 * h] {
        *b = 1.0;
    }
    let out = nw + 4 * h;
    glorot(&mut rng, &mut p[out..out + h], h, 1);
    p
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct StepCache {
    input: Vec<f64>, // [x_t; h_{t-1}]
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn run(k: usize, h: usize, params: &[f64], seq: &FeatureMatrix, keep: bool) -> (Vec<f64>, Vec<StepCache>) {
    let nw = 4 * h * (k + h);
    let w = &params[..nw];
    let b = &params[nw..nw + 4 * h];
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    let mut caches = Vec::new();
    let mut z = vec![0.0; 4 * h];
    for x in seq.iter_rows() {
        let mut input = Vec::with_capacity(k + h);
        input.extend_from_slice(x);
        input.extend_from_slice(&hs);
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = b[r] + w[r * (k + h)..(r + 1) * (k + h)].iter().zip(&input).map(|(a, b)| a * b).sum::<f64>();
        }
        let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let c_prev = cs.clone();
        for j in 0..h {
            cs[j] = f[j] * c_prev[j] + i[j] * g[j];
        }
        let tanh_c: Vec<f64> = cs.iter().map(|c| c.tanh()).collect();
        for j in 0..h {
            hs[j] = o[j] * tanh_c[j];
        }
        if keep {
            caches.push(StepCache { input, i, f, g, o, c_prev, tanh_c });
        }
    }
    (hs, caches)
}

pub fn predict_sequence(k: usize, h: usize, params: &[f64], seq: &FeatureMatrix) -> f64 {
    let (hs, _) = run(k, h, params, seq, false);
    readout(k, h, params, &hs)
}

fn readout(k: usize, h: usize, params: &[f64], hs: &[f64]) -> f64 {
    let off = 4 * h * (k + h) + 4 * h;
    params[off + h] + params[off..off + h].iter().zip(hs).map(|(a, b)| a * b).sum::<f64>()
}

/// Mean squared error over the sequences and its gradient.
pub fn loss_and_grad(k: usize, h: usize, params: &[f64], seqs: &[FeatureMatrix], y: &[f64]) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let nw = 4 * h * (k + h);
    let out_off = nw + 4 * h;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut dz = vec![0.0; 4 * h];
    for (seq, &target) in seqs.iter().zip(y) {
        let (hs, caches) = run(k, h, params, seq, true);
        let pred = readout(k, h, params, &hs);
        let err = pred - target;
        loss += err * err;
        let dpred = 2.0 * err / n;
        grad[out_off + h] += dpred;
        let mut dh: Vec<f64> = (0..h).map(|j| dpred * params[out_off + j]).collect();
        for j in 0..h {
            grad[out_off + j] += dpred * hs[j];
        }
        let mut dc = vec![0.0; h];
        for cache in caches.iter().rev() {
            for j in 0..h {
                let do_ = dh[j] * cache.tanh_c[j];
                dc[j] += dh[j] * cache.o[j] * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
                let di = dc[j] * cache.g[j];
                let dg = dc[j] * cache.i[j];
                let df = dc[j] * cache.c_prev[j];
                dz[j] = di * cache.i[j] * (1.0 - cache.i[j]);
                dz[h + j] = df * cache.f[j] * (1.0 - cache.f[j]);
                dz[2 * h + j] = dg * (1.0 - cache.g[j] * cache.g[j]);
                dz[3 * h + j] = do_ * cache.o[j] * (1.0 - cache.o[j]);
                dc[j] *= cache.f[j];
            }
            let mut dinput = vec![0.0; k + h];
            for r in 0..4 * h {
                let d = dz[r];
                if d == 0.0 {
                    continue;
                }
                let row = r * (k + h);
                for c in 0..k + h {
                    grad[row + c] += d * cache.input[c];
                    dinput[c] += d * params[row + c];
                }
                grad[nw + r] += d;
            }
            dh.copy_from_slice(&dinput[k..]);
        }
    }
    (loss / n, grad)
}
