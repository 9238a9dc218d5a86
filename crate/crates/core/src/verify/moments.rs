//! Monte-Carlo check of the weight statistics under Gaussian gradients.
//!
//! The mean and variance estimates are pinned at the true moments (`m = 0`,
//! `v = 1`) and gradients are i.i.d. standard normal, so the distance is
//! exactly chi-squared with `d` degrees of freedom. The weight mass follows
//! the full TAdam recursion starting from `beta1 / (1 - beta1)`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Claim, Verdict};
use crate::error::{Error, Result};
use crate::optim::{student_t_weight, weight_mass_decay};
use crate::rng::{stream, Stream};
use crate::stats::{batch_means_stderr, mean, sample_variance, Z_99_ONE_SIDED};

pub const MIN_STEPS: usize = 10_000;

/// Relative tolerance on the sample mean of the distance.
pub const DISTANCE_TOLERANCE: f64 = 0.02;

const Z_99_TWO_SIDED: f64 = 2.575_829_303_548_901;
const BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Two-sided 99% confidence interval.
    pub ci99: [f64; 2],
}

impl Estimate {
    fn new(mean: f64, stderr: f64) -> Self {
        Self {
            mean,
            stderr,
            ci99: [mean - Z_99_TWO_SIDED * stderr, mean + Z_99_TWO_SIDED * stderr],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheckReport {
    pub d: usize,
    pub nu: f64,
    pub beta1: f64,
    pub samples: usize,
    pub seed: u64,
    pub mean_distance: Estimate,
    pub mean_weight: Estimate,
    pub mean_beta_w: Estimate,
    /// `(nu + d) / (d - 2)`, only defined for `d > 2`.
    pub weight_upper_bound: Option<f64>,
    pub claims: Vec<Claim>,
    pub notices: Vec<String>,
}

impl MomentCheckReport {
    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn claim(&self, prefix: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.claim.starts_with(prefix))
    }
}

pub fn mc_moment_check(d: usize, nu: f64, beta1: f64, n_steps: usize, seed: u64) -> Result<MomentCheckReport> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidConfig(format!("nu must be positive, got {nu}")));
    }
    if !(0.5..1.0).contains(&beta1) {
        return Err(Error::InvalidConfig(format!("beta1 must lie in [0.5, 1), got {beta1}")));
    }
    if n_steps < MIN_STEPS {
        return Err(Error::InvalidConfig(format!("need at least {MIN_STEPS} steps, got {n_steps}")));
    }

    let mut rng = stream(seed, Stream::Gradients);
    let dim = d as f64;
    let decay = weight_mass_decay(beta1);
    let mut mass = beta1 / (1.0 - beta1);

    let mut distances = Vec::with_capacity(n_steps);
    let mut weights = Vec::with_capacity(n_steps);
    let mut decays = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let distance: f64 = (0..d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * g
            })
            .sum();
        let w = student_t_weight(nu, dim, distance);
        decays.push(mass / (mass + w));
        mass = decay * mass + w;
        distances.push(distance);
        weights.push(w);
    }

    let n = n_steps as f64;
    let mean_distance = Estimate::new(mean(&distances), (sample_variance(&distances) / n).sqrt());
    let mean_weight = Estimate::new(mean(&weights), (sample_variance(&weights) / n).sqrt());
    // consecutive decays share the weight mass, so use batch means
    let mean_beta_w = Estimate::new(mean(&decays), batch_means_stderr(&decays, BATCHES));

    let mut claims = Vec::new();
    let mut notices = Vec::new();

    let tol = DISTANCE_TOLERANCE * dim;
    claims.push(Claim {
        claim: "E[D] = d".into(),
        statistic: mean_distance.mean,
        interval: [dim - tol, dim + tol],
        verdict: Verdict::from_bool((mean_distance.mean - dim).abs() <= tol),
        note: String::new(),
    });

    let weight_upper_bound = (d > 2).then(|| (nu + dim) / (dim - 2.0));
    match weight_upper_bound {
        Some(hi) => claims.push(Claim {
            claim: "1 <= E[w] <= (nu+d)/(d-2)".into(),
            statistic: mean_weight.mean,
            interval: [1.0, hi],
            verdict: Verdict::from_bool((1.0..=hi).contains(&mean_weight.mean)),
            note: String::new(),
        }),
        None => {
            let note = format!("upper bound on E[w] requires d > 2, got d = {d}; checking only E[w] >= 1");
            notices.push(note.clone());
            claims.push(Claim {
                claim: "1 <= E[w] <= (nu+d)/(d-2)".into(),
                statistic: mean_weight.mean,
                interval: [1.0, f64::INFINITY],
                verdict: if mean_weight.mean >= 1.0 { Verdict::Skipped } else { Verdict::Fail },
                note,
            });
        }
    }

    // one-sided: reject E[beta_w] <= beta1 only when the mean exceeds it by
    // more than z_{0.99} standard errors
    let slack = Z_99_ONE_SIDED * mean_beta_w.stderr;
    claims.push(Claim {
        claim: "E[beta_w] <= beta1".into(),
        statistic: mean_beta_w.mean,
        interval: [f64::NEG_INFINITY, beta1 + slack],
        verdict: Verdict::from_bool(mean_beta_w.mean <= beta1 + slack),
        note: format!(
            "excess over beta1 = {:.3e} ({:.1} standard errors)",
            mean_beta_w.mean - beta1,
            (mean_beta_w.mean - beta1) / mean_beta_w.stderr
        ),
    });

    Ok(MomentCheckReport {
        d,
        nu,
        beta1,
        samples: n_steps,
        seed,
        mean_distance,
        mean_weight,
        mean_beta_w,
        weight_upper_bound,
        claims,
        notices,
    })
}
