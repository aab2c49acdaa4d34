//! Feed-forward network: tanh hidden layers, linear scalar output, mean
//! squared error loss.
//!
//! Parameter layout, for each layer `l` mapping `sizes[l] -> sizes[l+1]`:
//! the weight matrix row-major (`out x in`) followed by the bias vector.

use super::init::{glorot, rng};
use crate::matrix::FeatureMatrix;

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

pub fn init_params(sizes: &[usize], seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut params = vec![0.0; param_count(sizes)];
    let mut off = 0;
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        glorot(&mut rng, &mut params[off..off + fan_in * fan_out], fan_in, fan_out);
        off += fan_in * fan_out + fan_out;
    }
    params
}

/// Activations of every layer for one input row (index 0 is the input).
fn forward_row(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
    let depth = sizes.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
    acts.push(x.to_vec());
    let mut off = 0;
    for l in 0..depth {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        let prev = &acts[l];
        let last = l + 1 == depth;
        let next: Vec<f64> = (0..n_out)
            .map(|o| {
                let z = b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
                if last {
                    z
                } else {
                    z.tanh()
                }
            })
            .collect();
        off += n_in * n_out + n_out;
        acts.push(next);
    }
    acts
}

pub fn predict_row(sizes: &[usize], params: &[f64], x: &[f64]) -> f64 {
    forward_row(sizes, params, x).last().expect("at least one layer")[0]
}

/// Mean squared error over the rows and its gradient with respect to `params`.
pub fn loss_and_grad(sizes: &[usize], params: &[f64], x: &FeatureMatrix, y: &[f64]) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let depth = sizes.len() - 1;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let offsets: Vec<usize> = sizes
        .windows(2)
        .scan(0, |acc, w| {
            let o = *acc;
            *acc += w[0] * w[1] + w[1];
            Some(o)
        })
        .collect();
    for (row, &target) in x.iter_rows().zip(y) {
        let acts = forward_row(sizes, params, row);
        let out = acts[depth][0];
        let err = out - target;
        loss += err * err;
        // delta at the (linear) output
        let mut delta = vec![2.0 * err / n];
        for l in (0..depth).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let off = offsets[l];
            let prev = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                for i in 0..n_in {
                    grad[off + o * n_in + i] += d * prev[i];
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &params[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                        back * (1.0 - prev[i] * prev[i])
                    })
                    .collect();
            }
        }
    }
    (loss / n, grad)
}
