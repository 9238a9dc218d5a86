//! Robust stochastic optimization with a student-t first moment.
//!
//! The [`optim`] module holds the update rules (SGD, Adam, AMSGrad, TAdam and
//! TAMSGrad). [`mlp`] and [`data`] provide a small regression testbed,
//! [`verify`] the Monte-Carlo and regret checks, and [`harness`] the
//! experiment runner and its file formats.

// negated comparisons below double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod mlp;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use optim::{Algorithm, Dof, GroupState, Optimizer, OptimizerConfig, StepDiagnostics};
