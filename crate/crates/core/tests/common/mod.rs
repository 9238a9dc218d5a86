#![allow(dead_code)]

use rand::Rng;
use tadam::mlp::{init_model, Batch, Matrix, MlpModel, REGRESSION_SIZES};
use tadam::rng::{stream, Stream};

/// Regression network with a random batch of `n` points on [0, 1].
pub fn network_and_batch(seed: u64, n: usize) -> (MlpModel, Batch) {
    let model = init_model(&REGRESSION_SIZES, seed).unwrap();
    let mut rng = stream(seed, Stream::Inputs);
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let ts: Vec<f64> = xs.iter().map(|x| (2.0 * std::f64::consts::PI * x).sin() + rng.random_range(-0.1..0.1)).collect();
    (model, Batch::new(Matrix::column(&xs), Matrix::column(&ts)).unwrap())
}

/// Central differences of the batch loss, one vector per parameter group.
pub fn finite_difference_grads(model: &MlpModel, batch: &Batch, h: f64) -> Vec<Vec<f64>> {
    let mut probe = model.clone();
    let sizes = model.group_sizes();
    let mut out = Vec::with_capacity(sizes.len());
    for (g, &n) in sizes.iter().enumerate() {
        let mut grad = vec![0.0; n];
        for (i, slot) in grad.iter_mut().enumerate() {
            let orig = probe.groups()[g][i];
            probe.groups_mut()[g][i] = orig + h;
            let up = probe.mse_loss(batch).unwrap();
            probe.groups_mut()[g][i] = orig - h;
            let down = probe.mse_loss(batch).unwrap();
            probe.groups_mut()[g][i] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
