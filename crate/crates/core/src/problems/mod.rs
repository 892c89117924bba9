//! Online objective sequences.
//!
//! A problem exposes bandit feedback at its current time step through
//! [`OnlineProblem::query`] and moves forward with [`OnlineProblem::advance`].
//! Hidden nonstationarity (drift, sensitivity changes) is driven by a stream
//! the problem owns, seeded at construction, so the function sequence does
//! not depend on where the learner queries. Query noise comes from a stream
//! supplied by the caller; replaying a clone of that stream replays the noise,
//! which is how simulators support two queries of the same function.

mod lqr;
mod resource_grid;
mod synthetic;
mod variation;

pub use lqr::{LqrConfig, LqrEnv};
pub use resource_grid::{Episode, ResourceGridConfig, ResourceGridEnv};
pub use synthetic::{
    bounded_variation_adversary, drifting_quadratic, random_walk_offset, BoundedVariationAdversary, ConstantProblem,
    DriftingQuadratic, DriftingQuadraticConfig, RandomWalkOffset,
};
pub use variation::{estimate_variation_constants, VariationEstimates};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::Stream;

/// What a problem lets the harness do and what it reveals to the metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    /// Two queries of the same function in one step are allowed. Only true
    /// for simulators that can reset to a common noise realization.
    pub supports_double_query: bool,
    pub exposes_true_cost: bool,
    pub exposes_gradient: bool,
    pub exposes_optimum: bool,
    pub lipschitz_l0: Option<f64>,
    pub smooth_l1: Option<f64>,
    pub variation_vf: Option<f64>,
}

pub trait OnlineProblem: Send {
    fn dimension(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    /// Current time index `t`.
    fn time(&self) -> usize;

    /// Bandit feedback `F_t(x; noise)` at the current time.
    fn query(&mut self, x: &[f64], noise: &mut Stream) -> f64;

    /// Moves the sequence from `t` to `t + 1`.
    fn advance(&mut self);

    /// Noise-free `f_t(x)`, for metrics only.
    fn true_cost(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Minimizer of `f_t`.
    fn optimum(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Per-step query bookkeeping that enforces the single-query contract.
#[derive(Debug, Clone, Default)]
pub struct QueryLedger {
    allow_double: bool,
    current: Option<usize>,
    at_current: u32,
    total: u64,
}

impl QueryLedger {
    pub fn new(allow_double: bool) -> Self {
        Self {
            allow_double,
            ..Self::default()
        }
    }

    /// Records one query at time `t`; a second query at the same `t` is
    /// rejected unless double queries are allowed.
    pub fn record(&mut self, t: usize) -> Result<()> {
        if self.current == Some(t) {
            let limit = if self.allow_double { 2 } else { 1 };
            if self.at_current >= limit {
                return Err(Error::QueryContract(format!(
                    "query {} at step {t} exceeds the limit of {limit}",
                    self.at_current + 1
                )));
            }
            self.at_current += 1;
        } else {
            self.current = Some(t);
            self.at_current = 1;
        }
        self.total += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// A problem behind the query contract.
pub struct Bandit<'a> {
    problem: &'a mut dyn OnlineProblem,
    ledger: QueryLedger,
}

impl<'a> Bandit<'a> {
    pub fn new(problem: &'a mut dyn OnlineProblem) -> Self {
        let allow = problem.capabilities().supports_double_query;
        Self {
            problem,
            ledger: QueryLedger::new(allow),
        }
    }

    pub fn query(&mut self, x: &[f64], noise: &mut Stream) -> Result<f64> {
        self.ledger.record(self.problem.time())?;
        Ok(self.problem.query(x, noise))
    }

    pub fn advance(&mut self) {
        self.problem.advance();
    }

    pub fn total_queries(&self) -> u64 {
        self.ledger.total()
    }

    pub fn problem(&self) -> &dyn OnlineProblem {
        &*self.problem
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream;

    #[test]
    fn ledger_rejects_second_query_on_single_query_problem() {
        let mut p = ConstantProblem::new(2, 1.0);
        let mut bandit = Bandit::new(&mut p);
        let mut noise = stream(0);
        bandit.query(&[0.0, 0.0], &mut noise).unwrap();
        assert!(matches!(
            bandit.query(&[0.0, 0.0], &mut noise),
            Err(Error::QueryContract(_))
        ));
        bandit.advance();
        bandit.query(&[0.0, 0.0], &mut noise).unwrap();
        assert_eq!(bandit.total_queries(), 2);
    }

    #[test]
    fn ledger_allows_two_but_not_three_in_simulation() {
        let mut ledger = QueryLedger::new(true);
        ledger.record(0).unwrap();
        ledger.record(0).unwrap();
        assert!(ledger.record(0).is_err());
        ledger.record(1).unwrap();
        assert_eq!(ledger.total(), 3);
    }
}
