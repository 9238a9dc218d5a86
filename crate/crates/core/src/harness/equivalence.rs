//! Twin-run comparison of Adam and TAdam with a very large `nu`.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::{epoch_order, make_batch};
use crate::data::{make_dataset, NoiseSpec};
use crate::error::Result;
use crate::mlp::{init_model, MlpModel, REGRESSION_SIZES};
use crate::optim::{Algorithm, Dof, Optimizer, OptimizerConfig};

/// Largest allowed relative divergence between the twin trajectories.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub steps: usize,
    pub nu: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// `max_t ||theta_tadam - theta_adam||_2 / ||theta_adam||_2`.
    pub max_relative_divergence: f64,
    pub final_relative_divergence: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn flatten(model: &MlpModel) -> Vec<f64> {
    model.groups().concat()
}

pub fn relative_divergence(a: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(reference).map(|(x, y)| (x - y) * (x - y)).sum();
    let norm: f64 = reference.iter().map(|y| y * y).sum();
    if diff == 0.0 {
        0.0
    } else {
        (diff / norm).sqrt()
    }
}

/// Trains two networks from the same initial weights on the same minibatch
/// stream, one with Adam and one with TAdam at degrees of freedom `nu`, and
/// tracks how far their parameters drift apart.
pub fn twin_divergence(
    base: &OptimizerConfig,
    nu: Dof,
    noise: &NoiseSpec,
    seed: u64,
    steps: usize,
    batch_size: usize,
    samples: usize,
) -> Result<EquivalenceReport> {
    let data = make_dataset(samples, noise, seed)?;
    let mut adam_model = init_model(&REGRESSION_SIZES, seed)?;
    let mut tadam_model = adam_model.clone();
    let sizes = adam_model.group_sizes();
    let mut adam = Optimizer::new(base.with_algorithm(Algorithm::Adam), &sizes)?;
    let mut tadam = Optimizer::new(base.with_algorithm(Algorithm::TAdam).with_nu(nu), &sizes)?;

    let batches_per_epoch = samples.div_ceil(batch_size.max(1));
    let epochs = steps.div_ceil(batches_per_epoch.max(1));
    let mut max_div: f64 = 0.0;
    let mut last_div = 0.0;
    let mut done = 0;
    'outer: for order in epoch_order(samples, seed, epochs) {
        for chunk in order.chunks(batch_size) {
            if done == steps {
                break 'outer;
            }
            let batch = make_batch(&data, chunk)?;
            let (_, ga) = adam_model.mse_loss_and_grad(&batch)?;
            let (_, gt) = tadam_model.mse_loss_and_grad(&batch)?;
            adam.step(&mut adam_model.groups_mut(), &ga)?;
            tadam.step(&mut tadam_model.groups_mut(), &gt)?;
            last_div = relative_divergence(&flatten(&tadam_model), &flatten(&adam_model));
            max_div = max_div.max(last_div);
            done += 1;
        }
    }

    Ok(EquivalenceReport {
        steps,
        nu: match nu {
            Dof::Fixed(v) => v,
            Dof::Auto => f64::NAN,
        },
        noise: *noise,
        seed,
        max_relative_divergence: max_div,
        final_relative_divergence: last_div,
        tolerance: EQUIVALENCE_TOLERANCE,
        passed: max_div < EQUIVALENCE_TOLERANCE,
    })
}

/// Equivalence check as configured, plus a control run at the default
/// `nu = d` that is expected to diverge.
pub fn run_equivalence_check(config: &ExperimentConfig) -> Result<(EquivalenceReport, EquivalenceReport)> {
    config.validate()?;
    let noise = config.noise[0].with_p(config.equivalence_p);
    let seed = config.seeds[0];
    let check = twin_divergence(
        &config.optimizer,
        Dof::Fixed(config.equivalence_nu),
        &noise,
        seed,
        config.equivalence_steps,
        config.batch_size,
        config.samples,
    )?;
    let control = twin_divergence(
        &config.optimizer,
        Dof::Auto,
        &noise,
        seed,
        config.equivalence_steps,
        config.batch_size,
        config.samples,
    )?;
    Ok((check, control))
}
