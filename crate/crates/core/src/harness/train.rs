//! One regression training run: fit the ReLU network to a corrupted
//! `sin(2*pi*x)` sample and score it against the clean function.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{ground_truth, make_dataset, Dataset, NoiseSpec};
use crate::error::{Error, Result};
use crate::mlp::{init_model, Batch, Matrix, MlpModel, REGRESSION_SIZES};
use crate::optim::{Optimizer, OptimizerConfig, StepDiagnostics};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub samples: usize,
    pub eval_points: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            samples: 1000,
            eval_points: 201,
        }
    }
}

/// Weight statistics of one epoch, pooled over groups and steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochDiagnostics {
    pub epoch: usize,
    pub mean_w: f64,
    pub min_w: f64,
    pub mean_beta_w: f64,
}

#[derive(Debug, Clone, Default)]
struct DiagAccumulator {
    sum_w: f64,
    min_w: f64,
    sum_beta: f64,
    count: usize,
}

impl DiagAccumulator {
    fn push(&mut self, d: &StepDiagnostics) {
        if self.count == 0 {
            self.min_w = d.weight;
        }
        self.sum_w += d.weight;
        self.min_w = self.min_w.min(d.weight);
        self.sum_beta += d.effective_decay;
        self.count += 1;
    }

    fn finish(&self, epoch: usize) -> Option<EpochDiagnostics> {
        (self.count > 0).then(|| EpochDiagnostics {
            epoch,
            mean_w: self.sum_w / self.count as f64,
            min_w: self.min_w,
            mean_beta_w: self.sum_beta / self.count as f64,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub optimizer: String,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub epochs: usize,
    /// Mean training loss (against the observed targets) per epoch.
    pub epoch_losses: Vec<f64>,
    /// MSE against `sin(2*pi*x)` on the evaluation grid; NaN when diverged.
    pub final_clean_mse: f64,
    pub diverged: bool,
    pub diagnostics: Vec<EpochDiagnostics>,
    /// Model output on the evaluation grid.
    pub predictions: Vec<f64>,
    pub wall_time_secs: f64,
}

impl RunRecord {
    /// Equality on everything except wall time.
    pub fn same_results(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.optimizer == other.optimizer
            && self.noise == other.noise
            && self.seed == other.seed
            && self.epochs == other.epochs
            && bits(&self.epoch_losses) == bits(&other.epoch_losses)
            && self.final_clean_mse.to_bits() == other.final_clean_mse.to_bits()
            && self.diverged == other.diverged
            && self.diagnostics == other.diagnostics
            && bits(&self.predictions) == bits(&other.predictions)
    }

    pub fn mean_weight(&self) -> Option<f64> {
        let n = self.diagnostics.len();
        (n > 0).then(|| self.diagnostics.iter().map(|d| d.mean_w).sum::<f64>() / n as f64)
    }
}

pub fn eval_grid(points: usize) -> Vec<f64> {
    let last = (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| i as f64 / last).collect()
}

pub fn clean_mse(model: &MlpModel, grid: &[f64]) -> Result<(f64, Vec<f64>)> {
    let pred = model.predict(&Matrix::column(grid))?;
    let preds = pred.as_slice().to_vec();
    let mse = preds
        .iter()
        .zip(grid)
        .map(|(p, x)| (p - ground_truth(*x)).powi(2))
        .sum::<f64>()
        / grid.len() as f64;
    Ok((mse, preds))
}

/// Minibatch index order for every epoch, shared by paired runs.
pub fn epoch_order(samples: usize, seed: u64, epochs: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut rng = stream(seed, Stream::Shuffle);
    (0..epochs).map(move |_| {
        let mut idx: Vec<usize> = (0..samples).collect();
        idx.shuffle(&mut rng);
        idx
    })
}

pub fn make_batch(data: &Dataset, idx: &[usize]) -> Result<Batch> {
    let xs: Vec<f64> = idx.iter().map(|&i| data.xs[i]).collect();
    let ts: Vec<f64> = idx.iter().map(|&i| data.ts[i]).collect();
    Batch::new(Matrix::column(&xs), Matrix::column(&ts))
}

/// Trains a fresh network. Data, initial weights and minibatch order depend
/// only on `seed` (and `noise`), never on the optimizer.
pub fn train_regression(
    config: &OptimizerConfig,
    noise: &NoiseSpec,
    seed: u64,
    settings: &TrainSettings,
) -> Result<RunRecord> {
    if settings.epochs == 0 || settings.batch_size == 0 {
        return Err(Error::InvalidConfig("epochs and batch size must be >= 1".into()));
    }
    let start = Instant::now();
    let data = make_dataset(settings.samples, noise, seed)?;
    let mut model = init_model(&REGRESSION_SIZES, seed)?;
    let mut opt = Optimizer::new(*config, &model.group_sizes())?;
    let grid = eval_grid(settings.eval_points);

    let mut epoch_losses = Vec::with_capacity(settings.epochs);
    let mut diagnostics = Vec::new();
    let mut diverged = false;

    'epochs: for (epoch, order) in epoch_order(settings.samples, seed, settings.epochs).enumerate() {
        let mut acc = DiagAccumulator::default();
        let mut loss_sum = 0.0;
        for chunk in order.chunks(settings.batch_size) {
            let batch = make_batch(&data, chunk)?;
            let (loss, grads) = model.mse_loss_and_grad(&batch)?;
            if !loss.is_finite() {
                diverged = true;
                break 'epochs;
            }
            loss_sum += loss * chunk.len() as f64;
            match opt.step(&mut model.groups_mut(), &grads) {
                Ok(diags) => diags.iter().for_each(|d| acc.push(d)),
                Err(Error::NonFinite { .. }) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        epoch_losses.push(loss_sum / settings.samples as f64);
        diagnostics.extend(acc.finish(epoch + 1));
    }

    let (mut final_clean_mse, predictions) = clean_mse(&model, &grid)?;
    if diverged || !final_clean_mse.is_finite() {
        diverged = true;
        final_clean_mse = f64::NAN;
    }
    Ok(RunRecord {
        optimizer: config.variant_name().to_string(),
        noise: *noise,
        seed,
        epochs: settings.epochs,
        epoch_losses,
        final_clean_mse,
        diverged,
        diagnostics,
        predictions,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_run_is_deterministic_and_learns() {
        let settings = TrainSettings { epochs: 5, batch_size: 32, samples: 256, eval_points: 51 };
        let noise = NoiseSpec::new(1.0, 0.05, 30).unwrap();
        let a = train_regression(&OptimizerConfig::tadam(), &noise, 3, &settings).unwrap();
        let b = train_regression(&OptimizerConfig::tadam(), &noise, 3, &settings).unwrap();
        assert!(a.same_results(&b));
        assert_eq!(a.epoch_losses.len(), 5);
        assert_eq!(a.diagnostics.len(), 5);
        assert_eq!(a.predictions.len(), 51);
        assert!(a.final_clean_mse >= 0.0);
        let adam = train_regression(&OptimizerConfig::adam(), &noise, 3, &settings).unwrap();
        assert!(adam.diagnostics.is_empty());
        assert_eq!(adam.optimizer, "adam");
    }

    #[test]
    fn grid_spans_unit_interval() {
        let g = eval_grid(5);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
