//! Full-batch gradient descent with a fixed learning rate.

/// Initial and final objective of a descent run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTrace {
    pub initial: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
}

/// Runs `epochs` steps of `params -= lr * grad` and leaves `params` at the
/// lowest-loss point visited, so the final loss never exceeds the initial one.
pub(crate) fn descend<F>(params: &mut Vec<f64>, learning_rate: f64, epochs: usize, mut objective: F) -> LossTrace
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (initial, mut grad) = objective(params);
    let mut best_loss = initial;
    let mut best = params.clone();
    let mut epochs_run = 0;
    for _ in 0..epochs {
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= learning_rate * g;
        }
        epochs_run += 1;
        let (loss, g) = objective(params);
        if !loss.is_finite() {
            break;
        }
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(params);
        }
        grad = g;
    }
    *params = best;
    LossTrace { initial, final_loss: best_loss, epochs_run }
}
