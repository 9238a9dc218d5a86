//! Experiment configuration and its flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! experiment = regress
//! alpha = 0.001
//! noise = 1:0.05, 2:0.03
//! p = 0, 10, 20
//! seeds = 0..10
//! ```
//!
//! Lists are comma separated; integer lists also accept half-open ranges
//! `a..b`. Unknown or repeated keys are errors; missing keys keep their
//! defaults. [`ExperimentConfig::render`] writes every key in a fixed order
//! and parsing that text gives back the same configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::NoiseSpec;
use crate::error::{Error, Result};
use crate::optim::{Algorithm, Dof, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Regress,
    Verify,
    Regret,
    Equivalence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Regress => "regress",
            Experiment::Verify => "verify",
            Experiment::Regret => "regret",
            Experiment::Equivalence => "equivalence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "regress" => Some(Experiment::Regress),
            "verify" => Some(Experiment::Verify),
            "regret" => Some(Experiment::Regret),
            "equivalence" => Some(Experiment::Equivalence),
            _ => None,
        }
    }
}

/// Shape of the target noise; the corruption probability is swept separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseShape {
    pub nu_noise: f64,
    pub scale: f64,
}

impl NoiseShape {
    pub fn with_p(self, p_percent: u32) -> NoiseSpec {
        NoiseSpec {
            nu_noise: self.nu_noise,
            scale: self.scale,
            p_percent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Shared hyperparameters; `algorithm` is ignored where `optimizers` applies.
    pub optimizer: OptimizerConfig,
    pub optimizers: Vec<Algorithm>,
    pub noise: Vec<NoiseShape>,
    pub p_values: Vec<u32>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub samples: usize,
    /// Points of the dense evaluation grid on [0, 1].
    pub eval_points: usize,
    pub export_datasets: bool,
    pub equivalence_steps: usize,
    pub equivalence_nu: f64,
    pub equivalence_p: u32,
    pub verify_dims: Vec<usize>,
    pub verify_betas: Vec<f64>,
    pub verify_steps: usize,
    pub regret_horizon: usize,
    pub regret_dim: usize,
    pub regret_alpha: f64,
    pub regret_outlier_prob: f64,
    pub regret_outlier_value: f64,
    pub regret_trace_stride: usize,
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Regress,
            optimizer: OptimizerConfig::adam(),
            optimizers: vec![Algorithm::Adam, Algorithm::TAdam],
            noise: vec![
                NoiseShape { nu_noise: 1.0, scale: 0.05 },
                NoiseShape { nu_noise: 2.0, scale: 0.03 },
            ],
            p_values: (0..=100).step_by(10).collect(),
            seeds: (0..10).collect(),
            epochs: 200,
            batch_size: 64,
            samples: 1000,
            eval_points: 201,
            export_datasets: false,
            equivalence_steps: 1000,
            equivalence_nu: 1e10,
            equivalence_p: 0,
            verify_dims: vec![5, 10, 50],
            verify_betas: vec![0.7, 0.9, 0.99],
            verify_steps: 100_000,
            regret_horizon: 10_000,
            regret_dim: 1,
            regret_alpha: 2.0,
            regret_outlier_prob: 0.0,
            regret_outlier_value: 100.0,
            regret_trace_stride: 10,
            workers: 1,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 || self.samples == 0 {
            return bad("batch_size and samples must be >= 1");
        }
        if self.eval_points < 2 {
            return bad("eval_points must be >= 2");
        }
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        if self.regret_trace_stride == 0 {
            return bad("regret_trace_stride must be >= 1");
        }
        let mut opt = self.optimizer;
        opt.algorithm = Algorithm::Adam;
        opt.validate()?;
        if self.optimizers.contains(&Algorithm::TAdam) {
            opt.with_algorithm(Algorithm::TAdam).validate()?;
        }
        for shape in &self.noise {
            shape.with_p(0).validate()?;
        }
        for &p in self.p_values.iter().chain([&self.equivalence_p]) {
            if p > 100 {
                return Err(Error::InvalidConfig(format!("p must be in [0, 100], got {p}")));
            }
        }
        if !(self.equivalence_nu > 0.0 && self.equivalence_nu.is_finite()) {
            return bad("equivalence_nu must be positive");
        }
        match self.experiment {
            Experiment::Regress => {
                if self.optimizers.is_empty() || self.noise.is_empty() || self.p_values.is_empty() {
                    return bad("regress needs optimizers, noise and p values");
                }
            }
            Experiment::Equivalence => {
                if self.noise.is_empty() {
                    return bad("equivalence needs a noise setting");
                }
            }
            Experiment::Verify => {
                if self.verify_dims.is_empty() || self.verify_betas.is_empty() {
                    return bad("verify needs dims and betas");
                }
            }
            Experiment::Regret => {
                if !(self.regret_alpha > 0.0 && self.regret_alpha.is_finite()) {
                    return bad("regret_alpha must be positive");
                }
                if !(0.0..=1.0).contains(&self.regret_outlier_prob) || !self.regret_outlier_value.is_finite() {
                    return bad("regret outlier settings out of range");
                }
                if self.regret_horizon == 0 || self.regret_dim == 0 {
                    return bad("regret horizon and dim must be >= 1");
                }
            }
        }
        Ok(())
    }

    /// Every (noise, p) pair of the sweep in canonical order.
    pub fn noise_grid(&self) -> Vec<NoiseSpec> {
        self.noise
            .iter()
            .flat_map(|shape| self.p_values.iter().map(|&p| shape.with_p(p)))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let o = &self.optimizer;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.experiment.name().into());
        kv("alpha", o.alpha.to_string());
        kv("beta1", o.beta1.to_string());
        kv("beta2", o.beta2.to_string());
        kv("epsilon", o.epsilon.to_string());
        kv(
            "nu",
            match o.nu {
                Dof::Auto => "auto".into(),
                Dof::Fixed(nu) => nu.to_string(),
            },
        );
        kv("amsgrad", o.amsgrad.to_string());
        kv("algorithm", o.algorithm.name().into());
        kv("optimizers", join(self.optimizers.iter().map(|a| a.name().to_string())));
        kv("noise", join(self.noise.iter().map(|n| format!("{}:{}", n.nu_noise, n.scale))));
        kv("p", join(self.p_values.iter().map(u32::to_string)));
        kv("seeds", join(self.seeds.iter().map(u64::to_string)));
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("samples", self.samples.to_string());
        kv("eval_points", self.eval_points.to_string());
        kv("export_datasets", self.export_datasets.to_string());
        kv("equivalence_steps", self.equivalence_steps.to_string());
        kv("equivalence_nu", self.equivalence_nu.to_string());
        kv("equivalence_p", self.equivalence_p.to_string());
        kv("verify_dims", join(self.verify_dims.iter().map(usize::to_string)));
        kv("verify_betas", join(self.verify_betas.iter().map(f64::to_string)));
        kv("verify_steps", self.verify_steps.to_string());
        kv("regret_horizon", self.regret_horizon.to_string());
        kv("regret_dim", self.regret_dim.to_string());
        kv("regret_alpha", self.regret_alpha.to_string());
        kv("regret_outlier_prob", self.regret_outlier_prob.to_string());
        kv("regret_outlier_value", self.regret_outlier_value.to_string());
        kv("regret_trace_stride", self.regret_trace_stride.to_string());
        kv("workers", self.workers.to_string());
        kv("out", self.output_dir.to_string_lossy().into_owned());
        s
    }

    /// SHA-256 of the rendered configuration without `out` and `workers`,
    /// which do not affect any result.
    pub fn hash(&self) -> String {
        let text: String = self
            .render()
            .lines()
            .filter(|l| !l.starts_with("out =") && !l.starts_with("workers ="))
            .map(|l| format!("{l}\n"))
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let o = &mut self.optimizer;
        match key {
            "experiment" => {
                self.experiment = Experiment::parse(value).ok_or_else(|| format!("unknown experiment `{value}`"))?
            }
            "alpha" => o.alpha = float(value)?,
            "beta1" => o.beta1 = float(value)?,
            "beta2" => o.beta2 = float(value)?,
            "epsilon" => o.epsilon = float(value)?,
            "nu" => {
                o.nu = if value == "auto" {
                    Dof::Auto
                } else {
                    Dof::Fixed(float(value)?)
                }
            }
            "amsgrad" => o.amsgrad = boolean(value)?,
            "algorithm" => o.algorithm = Algorithm::parse(value).ok_or_else(|| format!("unknown algorithm `{value}`"))?,
            "optimizers" => {
                self.optimizers = items(value)
                    .map(|v| Algorithm::parse(v).ok_or_else(|| format!("unknown algorithm `{v}`")))
                    .collect::<std::result::Result<_, _>>()?
            }
            "noise" => {
                self.noise = items(value)
                    .map(|v| {
                        let (nu, scale) = v.split_once(':').ok_or_else(|| format!("noise entry `{v}` is not nu:scale"))?;
                        Ok(NoiseShape {
                            nu_noise: float(nu.trim())?,
                            scale: float(scale.trim())?,
                        })
                    })
                    .collect::<std::result::Result<_, String>>()?
            }
            "p" => self.p_values = int_list(value)?,
            "seeds" => self.seeds = int_list(value)?,
            "epochs" => self.epochs = int(value)?,
            "batch_size" => self.batch_size = int(value)?,
            "samples" => self.samples = int(value)?,
            "eval_points" => self.eval_points = int(value)?,
            "export_datasets" => self.export_datasets = boolean(value)?,
            "equivalence_steps" => self.equivalence_steps = int(value)?,
            "equivalence_nu" => self.equivalence_nu = float(value)?,
            "equivalence_p" => self.equivalence_p = int(value)?,
            "verify_dims" => self.verify_dims = int_list(value)?,
            "verify_betas" => self.verify_betas = items(value).map(float).collect::<std::result::Result<_, _>>()?,
            "verify_steps" => self.verify_steps = int(value)?,
            "regret_horizon" => self.regret_horizon = int(value)?,
            "regret_dim" => self.regret_dim = int(value)?,
            "regret_alpha" => self.regret_alpha = float(value)?,
            "regret_outlier_prob" => self.regret_outlier_prob = float(value)?,
            "regret_outlier_value" => self.regret_outlier_value = float(value)?,
            "regret_trace_stride" => self.regret_trace_stride = int(value)?,
            "workers" => self.workers = int(value)?,
            "out" => {
                if value.is_empty() {
                    return Err("out must not be empty".into());
                }
                self.output_dir = PathBuf::from(value)
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

fn join(parts: impl Iterator<Item = String>) -> String {
    parts.collect::<Vec<_>>().join(", ")
}

fn items(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn float(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn int<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{v}` is not true/false")),
    }
}

const MAX_RANGE: u64 = 1 << 20;

fn int_list<T>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T: TryFrom<u64> + std::str::FromStr,
{
    let mut out = Vec::new();
    for item in items(value) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (u64, u64) = (int(a.trim())?, int(b.trim())?);
            if b < a || b - a > MAX_RANGE {
                return Err(format!("bad range `{item}`"));
            }
            for x in a..b {
                out.push(T::try_from(x).map_err(|_| format!("{x} out of range"))?);
            }
        } else {
            out.push(int(item)?);
        }
    }
    Ok(out)
}
