//! Online learning in adversarial MDPs with known dynamics and full-information
//! losses: low-switching follow-the-perturbed-leader learners for deterministic
//! and communicating MDPs, the graph and probability analysis they rely on, and
//! a harness for regret experiments.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycle_opt;
pub mod error;
pub mod fpl;
pub mod harness;
pub mod learner;
pub mod lp;
pub mod mdp;
pub mod rng;

pub use error::{Error, Result};
