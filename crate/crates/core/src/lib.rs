//! Online zeroth-order optimization with residual feedback.
//!
//! The learner sees one function value per step from a time-varying
//! objective and builds a gradient estimate from the difference between the
//! current and the previous feedback. Competing estimators, projected
//! updates, parameter schedules, benchmark problems and evaluation metrics
//! live alongside it.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod feasible_sets;
pub mod metrics;
pub mod optimizer;
pub mod problems;
pub mod sampling;
pub mod schedules;
pub mod smoothing;
pub mod vecops;

pub use error::{Error, Result};
