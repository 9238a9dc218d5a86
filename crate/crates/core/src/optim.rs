//! Per-step update rules for SGD, Adam/AMSGrad and TAdam/TAMSGrad.
//!
//! TAdam replaces Adam's fixed-decay first moment with an incremental
//! student-t mean estimate. Each step measures how far the gradient lies from
//! the running mean (a diagonal Mahalanobis distance against the second
//! moment), turns that distance into a sample weight, and mixes the gradient
//! into the momentum in proportion to that weight. The second moment and the
//! parameter update are Adam's, unchanged.
//!
//! State is kept per parameter group (one weight matrix or one bias vector).
//! The distance, the weight and the default degrees of freedom are all
//! computed over a single group.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Adam,
    TAdam,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Adam => "adam",
            Algorithm::TAdam => "tadam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Some(Algorithm::Sgd),
            "adam" => Some(Algorithm::Adam),
            "tadam" => Some(Algorithm::TAdam),
            _ => None,
        }
    }
}

/// Degrees of freedom of the student-t first moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dof {
    /// Resolves to the parameter count of each group at registration.
    Auto,
    Fixed(f64),
}

impl Dof {
    pub fn resolve(self, dim: usize) -> f64 {
        match self {
            Dof::Auto => dim as f64,
            Dof::Fixed(nu) => nu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub nu: Dof,
    pub amsgrad: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam()
    }
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        Self {
            algorithm: Algorithm::Adam,
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            nu: Dof::Auto,
            amsgrad: false,
        }
    }

    pub fn tadam() -> Self {
        Self {
            algorithm: Algorithm::TAdam,
            ..Self::adam()
        }
    }

    pub fn sgd(alpha: f64) -> Self {
        Self {
            algorithm: Algorithm::Sgd,
            alpha,
            ..Self::adam()
        }
    }

    pub fn with_algorithm(self, algorithm: Algorithm) -> Self {
        Self { algorithm, ..self }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_nu(self, nu: Dof) -> Self {
        Self { nu, ..self }
    }

    pub fn with_amsgrad(self, amsgrad: bool) -> Self {
        Self { amsgrad, ..self }
    }

    /// Display name: `adam`, `amsgrad`, `tadam`, `tamsgrad` or `sgd`.
    pub fn variant_name(&self) -> &'static str {
        match (self.algorithm, self.amsgrad) {
            (Algorithm::Sgd, _) => "sgd",
            (Algorithm::Adam, false) => "adam",
            (Algorithm::Adam, true) => "amsgrad",
            (Algorithm::TAdam, false) => "tadam",
            (Algorithm::TAdam, true) => "tamsgrad",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        // alpha = 0 is allowed: it freezes the parameters while the state still advances.
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if self.algorithm == Algorithm::Sgd {
            return Ok(());
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad(format!("beta1 must lie in [0, 1), got {}", self.beta1));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("beta2 must lie in [0, 1), got {}", self.beta2));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.algorithm == Algorithm::TAdam {
            if let Dof::Fixed(nu) = self.nu {
                if !(nu > 0.0) || nu.is_nan() {
                    return bad(format!("nu must be positive, got {nu}"));
                }
            }
            // (2*beta1 - 1) / beta1 is the weight-mass decay; below 0.5 it turns negative.
            if self.beta1 < 0.5 {
                return bad(format!("TAdam requires beta1 >= 0.5, got {}", self.beta1));
            }
        }
        Ok(())
    }

    fn expect(&self, algorithm: Algorithm) -> Result<()> {
        if self.algorithm != algorithm {
            return Err(Error::InvalidConfig(format!(
                "expected algorithm {}, config says {}",
                algorithm.name(),
                self.algorithm.name()
            )));
        }
        self.validate()
    }
}

/// Optimizer state for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    /// First moment.
    pub m: Vec<f64>,
    /// Second moment, elementwise non-negative.
    pub v: Vec<f64>,
    /// Running elementwise max of `v` (AMSGrad).
    pub v_hat: Vec<f64>,
    /// Accumulated student-t weight mass `W`.
    pub weight_mass: f64,
    pub step: u64,
    /// Degrees of freedom resolved for this group.
    pub nu: f64,
}

impl GroupState {
    pub fn new(dim: usize, config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidConfig("parameter group must be non-empty".into()));
        }
        Ok(Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            v_hat: vec![0.0; dim],
            weight_mass: config.beta1 / (1.0 - config.beta1),
            step: 0,
            nu: config.nu.resolve(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }
}

/// Per-step TAdam quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Sample weight `(nu + d) / (nu + D)`.
    pub weight: f64,
    /// Mahalanobis distance `D` of the gradient from the previous mean.
    pub distance: f64,
    /// `W / (W + w)`: the decay actually applied to the previous mean.
    pub effective_decay: f64,
}

pub fn sgd_step(params: &mut [f64], grad: &[f64], alpha: f64) -> Result<()> {
    ensure_len(params.len(), grad.len())?;
    ensure_finite("parameters", params)?;
    ensure_finite("gradient", grad)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= alpha * g;
    }
    Ok(())
}

pub fn adam_step(
    state: &mut GroupState,
    params: &mut [f64],
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<()> {
    config.expect(Algorithm::Adam)?;
    check_inputs(state, params, grad)?;

    let b1 = config.beta1;
    for (m, g) in state.m.iter_mut().zip(grad) {
        *m = b1 * *m + (1.0 - b1) * g;
    }
    update_second_moment(state, grad, config);
    state.step += 1;
    apply_update(state, params, config);
    Ok(())
}

pub fn tadam_step(
    state: &mut GroupState,
    params: &mut [f64],
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<StepDiagnostics> {
    config.expect(Algorithm::TAdam)?;
    check_inputs(state, params, grad)?;
    if !(state.nu > 0.0) {
        return Err(Error::InvalidConfig(format!("nu must be positive, got {}", state.nu)));
    }

    let dim = state.dim() as f64;
    let distance = mahalanobis(grad, &state.m, &state.v, config.epsilon);
    let weight = student_t_weight(state.nu, dim, distance);

    let mass = state.weight_mass;
    let total = mass + weight;
    let keep = mass / total;
    let take = weight / total;
    for (m, g) in state.m.iter_mut().zip(grad) {
        *m = keep * *m + take * g;
    }
    state.weight_mass = weight_mass_decay(config.beta1) * mass + weight;

    update_second_moment(state, grad, config);
    state.step += 1;
    apply_update(state, params, config);

    Ok(StepDiagnostics {
        weight,
        distance,
        effective_decay: keep,
    })
}

/// `sum_j (g_j - m_j)^2 / (v_j + eps)`.
pub fn mahalanobis(grad: &[f64], mean: &[f64], var: &[f64], epsilon: f64) -> f64 {
    grad.iter()
        .zip(mean)
        .zip(var)
        .map(|((g, m), v)| {
            let diff = g - m;
            diff * diff / (v + epsilon)
        })
        .sum()
}

pub fn student_t_weight(nu: f64, dim: f64, distance: f64) -> f64 {
    (nu + dim) / (nu + distance)
}

/// Decay applied to the weight mass each step, `(2*beta1 - 1) / beta1`.
///
/// Chosen so that `W` stays at `beta1 / (1 - beta1)` when every weight is 1.
pub fn weight_mass_decay(beta1: f64) -> f64 {
    (2.0 * beta1 - 1.0) / beta1
}

/// Decay `W / (W + w)` that the next TAdam step would apply to the mean.
pub fn effective_decay(state: &GroupState, weight: f64) -> Result<f64> {
    if !(state.weight_mass >= 0.0) || !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "effective decay needs W >= 0 and w > 0, got W = {}, w = {weight}",
            state.weight_mass
        )));
    }
    Ok(state.weight_mass / (state.weight_mass + weight))
}

fn check_inputs(state: &GroupState, params: &[f64], grad: &[f64]) -> Result<()> {
    ensure_len(state.dim(), grad.len())?;
    ensure_len(state.dim(), params.len())?;
    ensure_finite("gradient", grad)
}

fn update_second_moment(state: &mut GroupState, grad: &[f64], config: &OptimizerConfig) {
    let b2 = config.beta2;
    for (v, g) in state.v.iter_mut().zip(grad) {
        *v = b2 * *v + (1.0 - b2) * g * g;
    }
    if config.amsgrad {
        for (vh, v) in state.v_hat.iter_mut().zip(&state.v) {
            *vh = vh.max(*v);
        }
    }
}

/// `theta -= alpha * m / ((1 - b1^t) * (sqrt(v / (1 - b2^t)) + eps))`, with the
/// running max in place of `v` under AMSGrad.
fn apply_update(state: &GroupState, params: &mut [f64], config: &OptimizerConfig) {
    let t = state.step as f64;
    let bc1 = 1.0 - config.beta1.powf(t);
    let bc2 = 1.0 - config.beta2.powf(t);
    let second = if config.amsgrad { &state.v_hat } else { &state.v };
    for ((p, m), v) in params.iter_mut().zip(&state.m).zip(second) {
        *p -= config.alpha * m / (bc1 * ((v / bc2).sqrt() + config.epsilon));
    }
}

/// An optimizer over an ordered list of parameter groups.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    groups: Vec<GroupState>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, group_sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        let groups = group_sizes
            .iter()
            .map(|&d| GroupState::new(d, &config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, groups })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn groups(&self) -> &[GroupState] {
        &self.groups
    }

    /// Advances every group by one step. Returns per-group diagnostics for
    /// TAdam and an empty vector otherwise.
    ///
    /// All inputs are validated before any group is touched.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<Vec<StepDiagnostics>> {
        ensure_len(self.groups.len(), params.len())?;
        ensure_len(self.groups.len(), grads.len())?;
        for ((state, p), g) in self.groups.iter().zip(params.iter()).zip(grads) {
            check_inputs(state, p, g)?;
        }
        let config = self.config;
        let mut diagnostics = Vec::new();
        for ((state, p), g) in self.groups.iter_mut().zip(params.iter_mut()).zip(grads) {
            match config.algorithm {
                Algorithm::Sgd => {
                    sgd_step(p, g, config.alpha)?;
                    state.step += 1;
                }
                Algorithm::Adam => adam_step(state, p, g, &config)?,
                Algorithm::TAdam => diagnostics.push(tadam_step(state, p, g, &config)?),
            }
        }
        Ok(diagnostics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Straight-line scalar Adam, written independently of the vector path.
    fn scalar_adam(theta: f64, m: f64, v: f64, t: i32, g: f64, a: f64, b1: f64, b2: f64, eps: f64) -> (f64, f64, f64) {
        let m = b1 * m + (1.0 - b1) * g;
        let v = b2 * v + (1.0 - b2) * g * g;
        let denom = (1.0 - b1.powi(t)) * ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        (theta - a * m / denom, m, v)
    }

    /// Straight-line scalar TAdam (d = 1).
    #[allow(clippy::too_many_arguments)]
    fn scalar_tadam(
        theta: f64, m: f64, v: f64, big_w: f64, t: i32, g: f64, nu: f64, a: f64, b1: f64, b2: f64, eps: f64,
    ) -> (f64, f64, f64, f64, f64) {
        let dist = (g - m) * (g - m) / (v + eps);
        let w = (nu + 1.0) / (nu + dist);
        let m = big_w / (big_w + w) * m + w / (big_w + w) * g;
        let big_w = (2.0 * b1 - 1.0) / b1 * big_w + w;
        let v = b2 * v + (1.0 - b2) * g * g;
        let denom = (1.0 - b1.powi(t)) * ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        (theta - a * m / denom, m, v, big_w, w)
    }

    #[test]
    fn adam_first_step_matches_scalar_oracle() {
        let cfg = OptimizerConfig::adam();
        let mut st = GroupState::new(1, &cfg).unwrap();
        let mut p = [0.0];
        adam_step(&mut st, &mut p, &[1.0], &cfg).unwrap();
        assert!((st.m[0] - 0.1).abs() < 1e-15);
        assert!((st.v[0] - 0.001).abs() < 1e-15);
        let (theta, _, _) = scalar_adam(0.0, 0.0, 0.0, 1, 1.0, 1e-3, 0.9, 0.999, 1e-8);
        assert!((p[0] - theta).abs() < 1e-18);
        // -alpha / (1 + eps)
        assert!((p[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_trajectory_matches_scalar_oracle() {
        let cfg = OptimizerConfig::adam().with_alpha(0.01);
        let mut st = GroupState::new(1, &cfg).unwrap();
        let mut p = [0.5];
        let (mut theta, mut m, mut v) = (0.5, 0.0, 0.0);
        for t in 1..=200 {
            let g = (t as f64 * 0.37).sin() + 0.1;
            adam_step(&mut st, &mut p, &[g], &cfg).unwrap();
            (theta, m, v) = scalar_adam(theta, m, v, t, g, 0.01, 0.9, 0.999, 1e-8);
            assert!((p[0] - theta).abs() <= 1e-12 * theta.abs().max(1.0));
        }
        assert!((st.m[0] - m).abs() < 1e-14 && (st.v[0] - v).abs() < 1e-14);
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let cfg = OptimizerConfig::adam();
        let mut st = GroupState::new(3, &cfg).unwrap();
        let mut p = [1.0, -2.0, 3.0];
        adam_step(&mut st, &mut p, &[0.0; 3], &cfg).unwrap();
        assert_eq!(p, [1.0, -2.0, 3.0]);
        assert_eq!(st.m, vec![0.0; 3]);
        assert_eq!(st.v, vec![0.0; 3]);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters_but_advances_state() {
        let cfg = OptimizerConfig::adam().with_alpha(0.0);
        let mut st = GroupState::new(2, &cfg).unwrap();
        let mut p = [1.0, 2.0];
        adam_step(&mut st, &mut p, &[0.3, -4.0], &cfg).unwrap();
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(st.step, 1);
        assert!(st.m[0] != 0.0 && st.v[1] != 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = OptimizerConfig::adam();
        let mut st = GroupState::new(2, &cfg).unwrap();
        let mut p = [0.0, 0.0];
        assert!(matches!(
            adam_step(&mut st, &mut p, &[1.0], &cfg),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            adam_step(&mut st, &mut p, &[1.0, f64::NAN], &cfg),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert_eq!(st.step, 0);
        assert!(adam_step(&mut st, &mut p, &[1.0, 1.0], &OptimizerConfig::tadam()).is_err());
    }

    #[test]
    fn amsgrad_uses_running_max() {
        let cfg = OptimizerConfig::adam().with_amsgrad(true).with_alpha(0.1);
        let mut st = GroupState::new(1, &cfg).unwrap();
        let mut p = [0.0];
        adam_step(&mut st, &mut p, &[10.0], &cfg).unwrap();
        adam_step(&mut st, &mut p, &[0.0], &cfg).unwrap();
        assert!(st.v_hat[0] > st.v[0]);
        assert_eq!(st.v_hat[0], (1.0 - cfg.beta2) * 100.0);
    }

    #[test]
    fn tadam_config_errors() {
        let low_beta = OptimizerConfig { beta1: 0.4, ..OptimizerConfig::tadam() };
        assert!(matches!(GroupState::new(1, &low_beta), Err(Error::InvalidConfig(_))));
        let bad_nu = OptimizerConfig::tadam().with_nu(Dof::Fixed(0.0));
        assert!(GroupState::new(1, &bad_nu).is_err());
        let neg_nu = OptimizerConfig::tadam().with_nu(Dof::Fixed(-3.0));
        assert!(neg_nu.validate().is_err());
        assert!(OptimizerConfig { beta1: 1.0, ..OptimizerConfig::adam() }.validate().is_err());
        assert!(OptimizerConfig { epsilon: 0.0, ..OptimizerConfig::adam() }.validate().is_err());
    }

    #[test]
    fn auto_dof_resolves_to_group_size() {
        let cfg = OptimizerConfig::tadam();
        let opt = Optimizer::new(cfg, &[50, 2500, 1]).unwrap();
        let nus: Vec<f64> = opt.groups().iter().map(|g| g.nu).collect();
        assert_eq!(nus, vec![50.0, 2500.0, 1.0]);
        assert_eq!(opt.groups()[0].weight_mass, 0.9 / (1.0 - 0.9));
    }

    #[test]
    fn tadam_zero_distance_upweights_without_moving_mean() {
        let cfg = OptimizerConfig::tadam();
        let mut st = GroupState::new(4, &cfg).unwrap();
        st.m = vec![0.5, -0.25, 1.0, 0.0];
        st.v = vec![0.1, 0.2, 0.3, 0.4];
        st.step = 3;
        let g = st.m.clone();
        let mut p = [0.0; 4];
        let diag = tadam_step(&mut st, &mut p, &g, &cfg).unwrap();
        assert_eq!(diag.distance, 0.0);
        assert_eq!(diag.weight, 2.0);
        for (a, b) in st.m.iter().zip(&g) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn tadam_first_step_degeneracy_matches_oracle() {
        let cfg = OptimizerConfig::tadam();
        let mut st = GroupState::new(1, &cfg).unwrap();
        assert!((st.weight_mass - 9.0).abs() < 1e-14);
        let mut p = [0.0];
        let diag = tadam_step(&mut st, &mut p, &[1.0], &cfg).unwrap();
        let (theta, m, v, big_w, w) = scalar_tadam(0.0, 0.0, 0.0, st_w0(), 1, 1.0, 1.0, 1e-3, 0.9, 0.999, 1e-8);
        assert!((diag.distance - 1e8).abs() < 1e-6);
        assert!((diag.weight - 2.0 / (1.0 + 1e8)).abs() < 1e-22);
        assert!((diag.weight - 2e-8).abs() < 1e-15);
        assert!((st.m[0] - 2.2e-9).abs() < 0.05e-9);
        assert!((st.m[0] - m).abs() < 1e-24);
        assert!((st.v[0] - v).abs() < 1e-18);
        assert!((st.weight_mass - big_w).abs() < 1e-12);
        assert!((diag.weight - w).abs() < 1e-24);
        assert!((p[0] - theta).abs() < 1e-18);
    }

    fn st_w0() -> f64 {
        0.9 / (1.0 - 0.9)
    }

    #[test]
    fn tadam_trajectory_matches_scalar_oracle() {
        let cfg = OptimizerConfig::tadam().with_alpha(0.01);
        let mut st = GroupState::new(1, &cfg).unwrap();
        let mut p = [0.2];
        let (mut theta, mut m, mut v, mut big_w) = (0.2, 0.0, 0.0, st_w0());
        for t in 1..=300 {
            let g = if t % 17 == 0 { 25.0 } else { (t as f64 * 0.11).cos() };
            let diag = tadam_step(&mut st, &mut p, &[g], &cfg).unwrap();
            let w;
            (theta, m, v, big_w, w) = scalar_tadam(theta, m, v, big_w, t, g, 1.0, 0.01, 0.9, 0.999, 1e-8);
            assert!((diag.weight - w).abs() <= 1e-12 * w.max(1e-300));
            assert!((p[0] - theta).abs() <= 1e-12);
        }
        assert!((st.m[0] - m).abs() < 1e-12 && (st.v[0] - v).abs() < 1e-12);
        assert!((st.weight_mass - big_w).abs() < 1e-9);
    }

    #[test]
    fn huge_dof_weights_are_unit_and_track_adam() {
        let tcfg = OptimizerConfig::tadam().with_nu(Dof::Fixed(1e12)).with_alpha(0.01);
        let acfg = tcfg.with_algorithm(Algorithm::Adam);
        let mut ts = GroupState::new(3, &tcfg).unwrap();
        let mut a_st = GroupState::new(3, &acfg).unwrap();
        // a populated second moment keeps the first distance moderate
        ts.v = vec![1.0; 3];
        a_st.v = vec![1.0; 3];
        let mut tp = [0.1, 0.2, 0.3];
        let mut ap = tp;
        for t in 0..2000 {
            let g: Vec<f64> = (0..3).map(|j| ((t * 3 + j) as f64 * 0.7).sin()).collect();
            let diag = tadam_step(&mut ts, &mut tp, &g, &tcfg).unwrap();
            adam_step(&mut a_st, &mut ap, &g, &acfg).unwrap();
            assert!((diag.weight - 1.0).abs() <= 1e-6, "step {t}: w = {}", diag.weight);
        }
        for (x, y) in tp.iter().zip(&ap) {
            assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
        }
    }

    #[test]
    fn effective_decay_examples() {
        let cfg = OptimizerConfig::tadam();
        let mut st = GroupState::new(1, &cfg).unwrap();
        st.weight_mass = 9.0;
        assert!((effective_decay(&st, 1.0).unwrap() - 0.9).abs() < 1e-15);
        assert!((effective_decay(&st, 10.0).unwrap() - 9.0 / 19.0).abs() < 1e-15);
        assert!(effective_decay(&st, 1e-12).unwrap() > 1.0 - 1e-12);
        assert!(effective_decay(&st, 0.0).is_err());
        // strictly decreasing in the weight: outliers (w < 1) decay more slowly than beta1
        let sweep: Vec<f64> = [1e-3, 0.1, 0.5, 1.0, 2.0, 10.0].iter().map(|&w| effective_decay(&st, w).unwrap()).collect();
        assert!(sweep.windows(2).all(|p| p[0] > p[1]));
        assert!(sweep[2] > 0.9 && sweep[4] < 0.9);
    }

    #[test]
    fn unit_weights_keep_weight_mass_fixed() {
        for &b1 in &[0.5f64, 0.7, 0.9, 0.99, 0.999] {
            let w0 = b1 / (1.0 - b1);
            let mut w = w0;
            for _ in 0..10_000 {
                assert!((w / (w + 1.0) - b1).abs() <= 1e-12);
                w = weight_mass_decay(b1) * w + 1.0;
            }
            assert!((w - w0).abs() <= 1e-12 * w0, "beta1 = {b1}: {w} vs {w0}");
        }
    }

    #[test]
    fn gradient_spike_moves_mean_less_than_adam() {
        let cfg = OptimizerConfig::tadam();
        let mut st = GroupState::new(4, &cfg).unwrap();
        st.m = vec![0.1; 4];
        st.v = vec![0.02; 4];
        st.step = 50;
        let mut spike = vec![0.12, 0.08, 0.1, 1.0];
        let base = st.clone();
        let d1 = tadam_step(&mut st.clone(), &mut [0.0; 4], &spike, &cfg).unwrap();
        spike[3] *= 10.0;
        let mut after = base.clone();
        let d10 = tadam_step(&mut after, &mut [0.0; 4], &spike, &cfg).unwrap();
        let ratio = d10.distance / d1.distance;
        let expected = (2.0 * 0.02f64.powi(2) + 9.9f64.powi(2)) / (2.0 * 0.02f64.powi(2) + 0.9f64.powi(2));
        assert!((ratio - expected).abs() < 1e-9 * expected, "ratio {ratio}");
        assert!(d10.weight < d1.weight);
        let share = d10.weight / (base.weight_mass + d10.weight);
        assert!(share < 1.0 - cfg.beta1);
        let moved = (after.m[3] - base.m[3]).abs();
        let adam_moved = (1.0 - cfg.beta1) * (spike[3] - base.m[3]).abs();
        assert!(moved < adam_moved);
    }

    #[test]
    fn sgd_examples() {
        let mut p = [1.0];
        sgd_step(&mut p, &[2.0], 0.5).unwrap();
        assert_eq!(p, [0.0]);
        let mut p = [3.0, -1.0];
        sgd_step(&mut p, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(p, [3.0, -1.0]);
        let g = [0.3, -1.7, 2.5, 1e-3];
        let mut vec_p = [1.0, 2.0, 3.0, 4.0];
        let expected: Vec<f64> = vec_p.iter().zip(&g).map(|(p, g)| {
            let mut one = [*p];
            sgd_step(&mut one, &[*g], 0.1).unwrap();
            one[0]
        }).collect();
        sgd_step(&mut vec_p, &g, 0.1).unwrap();
        assert_eq!(vec_p.to_vec(), expected);
        assert!(sgd_step(&mut [1.0], &[f64::INFINITY], 0.1).is_err());
        assert!(sgd_step(&mut [f64::NAN], &[1.0], 0.1).is_err());
    }

    #[test]
    fn optimizer_validates_all_groups_before_mutating() {
        let mut opt = Optimizer::new(OptimizerConfig::tadam(), &[2, 3]).unwrap();
        let mut a = vec![0.0; 2];
        let mut b = vec![0.0; 3];
        let grads = vec![vec![1.0, 1.0], vec![1.0, f64::NAN, 1.0]];
        assert!(opt.step(&mut [&mut a, &mut b], &grads).is_err());
        assert!(opt.groups().iter().all(|g| g.step == 0));
        let grads = vec![vec![1.0, 1.0], vec![1.0, 2.0, 1.0]];
        let diag = opt.step(&mut [&mut a, &mut b], &grads).unwrap();
        assert_eq!(diag.len(), 2);
    }

    proptest! {
        #[test]
        fn weight_is_monotone_and_bounded(nu in 0.01f64..1e4, d in 1usize..5000, d1 in 0.0f64..1e6, d2 in 0.0f64..1e6) {
            let dim = d as f64;
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let w_lo = student_t_weight(nu, dim, lo);
            let w_hi = student_t_weight(nu, dim, hi);
            prop_assert!(w_lo >= w_hi);
            if hi > lo { prop_assert!(w_lo > w_hi); }
            prop_assert!(w_hi > 0.0 && w_lo <= (nu + dim) / nu * (1.0 + 1e-15));
            prop_assert_eq!(w_lo >= 1.0, lo <= dim);
        }

        #[test]
        fn amsgrad_max_is_nondecreasing(grads in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 1..60), tadam in any::<bool>()) {
            let base = if tadam { OptimizerConfig::tadam() } else { OptimizerConfig::adam() };
            let cfg = base.with_amsgrad(true);
            let mut opt = Optimizer::new(cfg, &[3]).unwrap();
            let mut p = vec![0.0; 3];
            let mut prev = vec![0.0; 3];
            for g in grads {
                opt.step(&mut [&mut p], &[g]).unwrap();
                let st = &opt.groups()[0];
                for j in 0..3 {
                    prop_assert!(st.v_hat[j] >= prev[j]);
                    prop_assert!(st.v_hat[j] >= st.v[j] && st.v[j] >= 0.0);
                }
                prev = st.v_hat.clone();
                prop_assert!(st.weight_mass >= 0.0);
            }
        }

        #[test]
        fn steps_are_deterministic(grads in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 2), 1..30)) {
            let run = || {
                let mut opt = Optimizer::new(OptimizerConfig::tadam(), &[2]).unwrap();
                let mut p = vec![0.5, -0.5];
                let mut diags = Vec::new();
                for g in &grads {
                    diags.extend(opt.step(&mut [&mut p], std::slice::from_ref(g)).unwrap());
                }
                (p, opt.groups()[0].clone(), diags)
            };
            let (p1, s1, d1) = run();
            let (p2, s2, d2) = run();
            prop_assert_eq!(p1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), p2.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(s1, s2);
            prop_assert_eq!(d1, d2);
        }

        #[test]
        fn effective_decay_in_unit_interval(w in 1e-12f64..1e6, mass in 1e-6f64..1e6) {
            let cfg = OptimizerConfig::tadam();
            let mut st = GroupState::new(1, &cfg).unwrap();
            st.weight_mass = mass;
            let b = effective_decay(&st, w).unwrap();
            prop_assert!(b > 0.0 && b < 1.0);
        }
    }
}
