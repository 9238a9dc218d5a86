//! Statistical checks of the optimizer's theoretical claims.
//!
//! [`moments`] samples the weight dynamics under Gaussian gradients and
//! compares the sample means of the distance, the weight and the effective
//! decay against their claimed bounds. [`regret`] runs the optimizer on
//! projected online convex streams and evaluates the regret bound on the
//! measured trajectory.

pub mod moments;
pub mod regret;

use serde::{Deserialize, Serialize};

pub use moments::{mc_moment_check, Estimate, MomentCheckReport};
pub use regret::{eval_bound_rhs, run_regret_experiment, BoundInputs, BoundTerms, ProblemSpec, RegretTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// One line of a machine-readable verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub claim: String,
    pub statistic: f64,
    /// Interval the statistic had to fall in, `[lo, hi]`.
    pub interval: [f64; 2],
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}
