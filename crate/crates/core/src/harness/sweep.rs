use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use super::train::{train_regression, RunRecord, TrainSettings};
use crate::data::NoiseSpec;
use crate::error::{Error, Result};
use crate::optim::Algorithm;
use crate::stats::quantile;

/// One cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub noise: NoiseSpec,
    pub seed: u64,
}

/// Runs in canonical order: noise shape, then p, then seed, then optimizer.
pub fn plan(config: &ExperimentConfig) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    for noise in config.noise_grid() {
        for &seed in &config.seeds {
            for &algorithm in &config.optimizers {
                runs.push(RunSpec { algorithm, noise, seed });
            }
        }
    }
    runs
}

pub fn settings(config: &ExperimentConfig) -> TrainSettings {
    TrainSettings {
        epochs: config.epochs,
        batch_size: config.batch_size,
        samples: config.samples,
        eval_points: config.eval_points,
    }
}

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Trains every (optimizer, noise, p, seed) combination. Runs at the same
/// seed share their dataset, initial weights and minibatch order, so the
/// optimizers are compared on identical data. Records come back in
/// [`plan`] order whatever the completion order.
pub fn run_regression_sweep(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    if config.experiment != Experiment::Regress {
        return Err(Error::InvalidConfig(format!(
            "expected a regress config, got {}",
            config.experiment.name()
        )));
    }
    config.validate()?;
    let settings = settings(config);
    let runs = plan(config);
    let pool = worker_pool(config.workers)?;
    pool.install(|| {
        use rayon::prelude::*;
        runs.par_iter()
            .map(|run| {
                let opt = config.optimizer.with_algorithm(run.algorithm);
                train_regression(&opt, &run.noise, run.seed, &settings)
            })
            .collect()
    })
}

/// Median and interquartile range of the final clean MSE per
/// (optimizer, noise shape, p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub optimizer: String,
    pub nu_noise: f64,
    pub scale: f64,
    pub p: u32,
    pub runs: usize,
    pub diverged: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Groups records and summarizes them; the output is sorted by key, so it
/// does not depend on the record order.
pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let key = |r: &RunRecord| {
        (
            r.optimizer.clone(),
            r.noise.nu_noise.to_bits(),
            r.noise.scale.to_bits(),
            r.noise.p_percent,
        )
    };
    let mut keys: Vec<_> = records.iter().map(key).collect();
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1)))
            .then(f64::from_bits(a.2).total_cmp(&f64::from_bits(b.2)))
            .then(a.3.cmp(&b.3))
    });
    keys.dedup();
    keys.into_iter()
        .map(|k| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| key(r) == k).collect();
            let mut values: Vec<f64> = group.iter().map(|r| r.final_clean_mse).filter(|x| !x.is_nan()).collect();
            values.sort_by(f64::total_cmp);
            let diverged = group.len() - values.len();
            // diverged runs count as worse than any finite run
            values.extend(std::iter::repeat_n(f64::INFINITY, diverged));
            Aggregate {
                optimizer: k.0,
                nu_noise: f64::from_bits(k.1),
                scale: f64::from_bits(k.2),
                p: k.3,
                runs: group.len(),
                diverged,
                median: quantile(&values, 0.5),
                q25: quantile(&values, 0.25),
                q75: quantile(&values, 0.75),
            }
        })
        .collect()
}
