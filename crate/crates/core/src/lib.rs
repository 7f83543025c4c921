//! Black-box optimization with Bayesian optimization, a self-adaptive
//! evolutionary algorithm, and the hybrid Bayesian-evolutionary algorithm
//! (BEA), plus gain-per-second accounting and a benchmark harness.
//!
//! All optimizers maximize. Each run produces a [`Trace`] of per-iteration
//! records whose overhead times are measured around the candidate-generation
//! step; evaluation time is a simulation parameter applied during analysis
//! (see [`efficiency`]).

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bea;
pub mod bench;
pub mod bo;
pub mod ea;
pub mod efficiency;
mod error;
pub mod gp;
pub mod harness;
pub mod kmeans;
pub mod objective;
pub mod smooth;
pub mod space;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use objective::{Objective, ObjectiveError};
pub use space::{SearchSpace, Solution};
pub use trace::{IterationRecord, Stage, Trace};
