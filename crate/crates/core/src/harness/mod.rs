//! Experiment runner: configuration, training sweeps, equivalence checks,
//! verification suites and their output files.

pub mod config;
pub mod emit;
pub mod equivalence;
pub mod sweep;
pub mod train;

use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, NoiseShape};
pub use emit::{emit_results, Manifest, OutputFile, ResultRow};
pub use equivalence::{run_equivalence_check, EquivalenceReport};
pub use sweep::{aggregate, run_regression_sweep, Aggregate};
pub use train::{train_regression, RunRecord, TrainSettings};

use crate::error::Result;
use crate::optim::Algorithm;
use crate::verify::regret::{run_regret_experiment, BoundTerms, ProblemSpec, RegretTrace};
use crate::verify::{mc_moment_check, Claim, MomentCheckReport, Verdict};

/// Sublinearity is checked for horizons from here on.
pub const SUBLINEAR_FROM: usize = 1000;

/// Everything an experiment produced, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<OutputFile>,
    /// Human-readable summary, one line per item.
    pub summary: Vec<String>,
    /// Overall verdict for checking experiments; `None` for sweeps.
    pub passed: Option<bool>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    match config.experiment {
        Experiment::Regress => regress(config),
        Experiment::Equivalence => equivalence(config),
        Experiment::Verify => verify(config),
        Experiment::Regret => regret(config),
    }
}

fn regress(config: &ExperimentConfig) -> Result<Outcome> {
    let records = run_regression_sweep(config)?;
    let files = emit::regression_files(&records, config)?;
    let summary = aggregate(&records)
        .iter()
        .map(|a| {
            format!(
                "{:<8} nu={} scale={} p={:>3}  median clean MSE {:.4e}  IQR [{:.4e}, {:.4e}]  ({} runs, {} diverged)",
                a.optimizer, a.nu_noise, a.scale, a.p, a.median, a.q25, a.q75, a.runs, a.diverged
            )
        })
        .collect();
    Ok(Outcome {
        files,
        summary,
        passed: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct EquivalenceFile {
    check: EquivalenceReport,
    control: EquivalenceReport,
}

fn equivalence(config: &ExperimentConfig) -> Result<Outcome> {
    let (check, control) = run_equivalence_check(config)?;
    let summary = vec![
        format!(
            "nu = {:e}: max relative divergence {:.3e} over {} steps (tolerance {:e}) -> {}",
            check.nu,
            check.max_relative_divergence,
            check.steps,
            check.tolerance,
            if check.passed { "PASS" } else { "FAIL" }
        ),
        format!(
            "control nu = d: max relative divergence {:.3e}",
            control.max_relative_divergence
        ),
    ];
    let passed = Some(check.passed);
    let files = vec![OutputFile {
        name: "equivalence.json".into(),
        bytes: emit::json_bytes(&EquivalenceFile { check, control })?,
    }];
    Ok(Outcome { files, summary, passed })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyClaim {
    pub d: usize,
    pub nu: f64,
    pub beta1: f64,
    #[serde(flatten)]
    pub claim: Claim,
}

#[derive(Debug, Serialize, Deserialize)]
struct VerifyFile {
    claims: Vec<VerifyClaim>,
    reports: Vec<MomentCheckReport>,
}

/// Monte-Carlo runs for every (d, beta1) pair with `nu = d`. Seeds are derived
/// from the first configured seed and the cell index.
pub fn run_verify_suite(config: &ExperimentConfig) -> Result<Vec<MomentCheckReport>> {
    let base = config.seeds[0];
    let cells: Vec<(usize, f64)> = config
        .verify_dims
        .iter()
        .flat_map(|&d| config.verify_betas.iter().map(move |&b| (d, b)))
        .collect();
    let pool = sweep::worker_pool(config.workers)?;
    pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(d, b))| mc_moment_check(d, d as f64, b, config.verify_steps, base.wrapping_add(i as u64)))
            .collect()
    })
}

fn verify(config: &ExperimentConfig) -> Result<Outcome> {
    let reports = run_verify_suite(config)?;
    let claims: Vec<VerifyClaim> = reports
        .iter()
        .flat_map(|r| {
            r.claims.iter().map(|c| VerifyClaim {
                d: r.d,
                nu: r.nu,
                beta1: r.beta1,
                claim: c.clone(),
            })
        })
        .collect();
    let summary = claims
        .iter()
        .map(|c| {
            format!(
                "[{}] d={} nu={} beta1={}  {}: {:.6} in [{:.6}, {:.6}] {}",
                verdict_tag(c.claim.verdict),
                c.d,
                c.nu,
                c.beta1,
                c.claim.claim,
                c.claim.statistic,
                c.claim.interval[0],
                c.claim.interval[1],
                c.claim.note
            )
        })
        .collect();
    let passed = Some(claims.iter().all(|c| c.claim.verdict != Verdict::Fail));
    let files = vec![OutputFile {
        name: "verify.json".into(),
        bytes: emit::json_bytes(&VerifyFile { claims, reports })?,
    }];
    Ok(Outcome { files, summary, passed })
}

fn verdict_tag(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Skipped => "SKIP",
    }
}

pub fn regret_problem(config: &ExperimentConfig) -> ProblemSpec {
    ProblemSpec {
        dim: config.regret_dim,
        horizon: config.regret_horizon,
        outlier_prob: config.regret_outlier_prob,
        outlier_value: config.regret_outlier_value,
        ..ProblemSpec::default()
    }
}

/// For every seed: one TAMSGrad run and one AMSGrad run on the same stream.
pub fn run_regret_suite(config: &ExperimentConfig) -> Result<Vec<RegretTrace>> {
    let problem = regret_problem(config);
    let base = config.optimizer.with_amsgrad(true).with_alpha(config.regret_alpha);
    let cells: Vec<(u64, Algorithm)> = config
        .seeds
        .iter()
        .flat_map(|&s| [(s, Algorithm::TAdam), (s, Algorithm::Adam)])
        .collect();
    let pool = sweep::worker_pool(config.workers)?;
    pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(seed, alg)| run_regret_experiment(&problem, &base.with_algorithm(alg), seed))
            .collect()
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretSummary {
    pub optimizer: String,
    pub seed: u64,
    pub horizon: usize,
    pub final_regret: f64,
    pub final_clean_regret: f64,
    pub bound: Option<BoundTerms>,
    pub bound_rhs: f64,
    pub bound_applicable: bool,
    pub bound_holds: bool,
    pub gamma: f64,
    pub beta_w_mean: f64,
    pub beta_w_bar: f64,
    pub d_inf: f64,
    pub g_inf: f64,
    /// Largest `R_2t / R_t` for `t >= 1000`; NaN when the horizon is too short.
    pub max_doubling_ratio: f64,
    pub sublinear: bool,
}

impl From<&RegretTrace> for RegretSummary {
    fn from(t: &RegretTrace) -> Self {
        let ratio = if t.horizon >= 2 * SUBLINEAR_FROM {
            t.max_doubling_ratio(SUBLINEAR_FROM)
        } else {
            f64::NAN
        };
        Self {
            optimizer: t.optimizer.clone(),
            seed: t.seed,
            horizon: t.horizon,
            final_regret: t.final_regret(),
            final_clean_regret: t.final_clean_regret(),
            bound: t.bound,
            bound_rhs: t.bound_rhs,
            bound_applicable: t.bound_applicable(),
            bound_holds: t.bound_holds(),
            gamma: t.gamma,
            beta_w_mean: t.beta_w_mean,
            beta_w_bar: t.beta_w_bar,
            d_inf: t.d_inf,
            g_inf: t.g_inf,
            max_doubling_ratio: ratio,
            sublinear: ratio < 2.0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RegretFile {
    runs: Vec<RegretSummary>,
}

fn regret(config: &ExperimentConfig) -> Result<Outcome> {
    let traces = run_regret_suite(config)?;
    let runs: Vec<RegretSummary> = traces.iter().map(RegretSummary::from).collect();
    let summary = runs
        .iter()
        .map(|r| {
            format!(
                "{:<9} seed={:<3} R_T={:.4} clean R_T={:.4} bound={:.4e} gamma={:.4} max R_2t/R_t={:.3} -> bound {} sublinear {}",
                r.optimizer,
                r.seed,
                r.final_regret,
                r.final_clean_regret,
                r.bound_rhs,
                r.gamma,
                r.max_doubling_ratio,
                if r.bound_holds { "ok" } else { "VIOLATED" },
                if r.sublinear { "ok" } else { "NO" },
            )
        })
        .collect();
    let passed = Some(runs.iter().all(|r| r.bound_holds && r.sublinear));
    let files = vec![
        OutputFile {
            name: "regret.json".into(),
            bytes: emit::json_bytes(&RegretFile { runs })?,
        },
        OutputFile {
            name: "regret_trace.csv".into(),
            bytes: emit::regret_trace_csv(&traces, config.regret_trace_stride)?,
        },
    ];
    Ok(Outcome { files, summary, passed })
}
