//! The online zeroth-order loop.
//!
//! At every step `t` the optimizer samples `u_t`, queries the problem once
//! (twice for the two-point baselines), forms a gradient estimate and moves
//! to `x_{t+1} = Π(x_t - η g_t)`. The sphere variant projects onto the shrunk
//! set `(1 - ξ) X` so that every query point stays inside `X`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::estimators::{
    naive_online_two_point, one_point_from_value, two_point_from_values, GradientEstimate, ResidualState,
};
use crate::feasible_sets::FeasibleSet;
use crate::problems::{Bandit, OnlineProblem};
use crate::sampling::{purpose_stream, sample_direction, DirectionKind, Stream};
use crate::schedules::contraction_rate;
use crate::smoothing::Kernel;
use crate::vecops;

const DIRECTION_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Residual,
    OnePoint,
    TwoPoint,
    NaiveOnlineTwoPoint,
    ResidualSphere,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Residual,
        EstimatorKind::OnePoint,
        EstimatorKind::TwoPoint,
        EstimatorKind::NaiveOnlineTwoPoint,
        EstimatorKind::ResidualSphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Residual => "residual",
            EstimatorKind::OnePoint => "one_point",
            EstimatorKind::TwoPoint => "two_point",
            EstimatorKind::NaiveOnlineTwoPoint => "naive_online_two_point",
            EstimatorKind::ResidualSphere => "residual_sphere",
        }
    }

    pub fn queries_per_step(self) -> u32 {
        match self {
            EstimatorKind::TwoPoint | EstimatorKind::NaiveOnlineTwoPoint => 2,
            _ => 1,
        }
    }

    pub fn needs_double_query(self) -> bool {
        self.queries_per_step() == 2
    }

    pub fn direction_kind(self) -> DirectionKind {
        match self {
            EstimatorKind::ResidualSphere => DirectionKind::Sphere,
            _ => DirectionKind::Gaussian,
        }
    }

    fn kernel(self) -> Kernel {
        match self {
            EstimatorKind::ResidualSphere => Kernel::UnitBall,
            _ => Kernel::Gaussian,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub estimator: EstimatorKind,
    pub eta: f64,
    pub delta: f64,
    /// Shrink factor; only read by the sphere variant.
    #[serde(default)]
    pub xi: f64,
    pub horizon: usize,
    pub set: FeasibleSet,
    /// Starting point; projected onto the (shrunk) set before the first step.
    pub x0: Vec<f64>,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be non-negative, got {}", self.eta),
            });
        }
        crate::error::check_positive("delta", self.delta)?;
        if self.horizon == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be at least 1".into(),
            });
        }
        check_dim(dim, self.x0.len())?;
        if let Some(d) = self.set.dimension() {
            check_dim(dim, d)?;
        }
        if self.estimator == EstimatorKind::ResidualSphere && !self.set.feasibility_margin(self.xi, self.delta)? {
            return Err(Error::InvalidParameter {
                name: "xi",
                reason: format!(
                    "xi = {} does not satisfy 1 >= xi >= delta / r for delta = {}",
                    self.xi, self.delta
                ),
            });
        }
        Ok(())
    }

    /// The set iterates live in: `X`, or `(1 - ξ) X` for the sphere variant.
    pub fn iterate_set(&self) -> Result<FeasibleSet> {
        match self.estimator {
            EstimatorKind::ResidualSphere => self.set.shrink(self.xi),
            _ => Ok(self.set.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    /// Iterate `x_t` the estimate was formed at.
    pub x: Vec<f64>,
    /// Point `x_t + δ u_t` that produced the feedback.
    pub query_point: Vec<f64>,
    /// Feedback value at the query point.
    pub value: f64,
    pub estimate: Vec<f64>,
    pub estimate_sq_norm: f64,
    /// Noise-free `f_t(x_t)` when the problem reveals it.
    pub realized_cost: Option<f64>,
    /// `|∇f_t(x_t)|²` when the problem reveals gradients.
    pub gradient_sq_norm: Option<f64>,
    pub queries_used: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunWarning {
    /// `α > 1` for the problem's `L0`: the second-moment recursion does not
    /// contract.
    NoContraction { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub config: OptimizerConfig,
    pub records: Vec<StepRecord>,
    pub final_x: Vec<f64>,
    pub total_queries: u64,
    pub warnings: Vec<RunWarning>,
}

impl RunTrace {
    fn empty(config: &OptimizerConfig) -> Self {
        Self {
            config: config.clone(),
            records: Vec::new(),
            final_x: config.x0.clone(),
            total_queries: 0,
            warnings: Vec::new(),
        }
    }

    pub fn realized_costs(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.realized_cost).collect()
    }
}

/// A run that stopped early; the trace holds every completed step.
#[derive(Debug, Clone)]
pub struct AbortedRun {
    pub error: Error,
    pub trace: RunTrace,
}

impl fmt::Display for AbortedRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run aborted after {} steps: {}",
            self.trace.records.len(),
            self.error
        )
    }
}

impl std::error::Error for AbortedRun {}

/// `Π_set(x - η g)`.
pub fn apply_update(set: &FeasibleSet, x: &[f64], estimate: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_dim(x.len(), estimate.len())?;
    set.project(&vecops::add_scaled(x, -eta, estimate))
}

fn finite(step: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteQuery { step, value })
    }
}

/// Single-transition form of [`run`].
pub struct Optimizer {
    config: OptimizerConfig,
    iterate_set: FeasibleSet,
    dim: usize,
    x: Vec<f64>,
    residual: ResidualState,
    directions: Stream,
    noise: Stream,
    t: usize,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, dim: usize) -> Result<Self> {
        config.validate(dim)?;
        let iterate_set = config.iterate_set()?;
        let x = iterate_set.project(&config.x0)?;
        Ok(Self {
            directions: purpose_stream(config.seed, DIRECTION_STREAM),
            noise: purpose_stream(config.seed, NOISE_STREAM),
            config,
            iterate_set,
            dim,
            x,
            residual: ResidualState::new(),
            t: 0,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn iterate_set(&self) -> &FeasibleSet {
        &self.iterate_set
    }

    /// Performs step `t`: advances the problem (for `t > 0`), queries it and
    /// updates the iterate.
    pub fn step(&mut self, bandit: &mut Bandit<'_>) -> Result<StepRecord> {
        let t = self.t;
        let cfg = &self.config;
        let (eta, delta, kind) = (cfg.eta, cfg.delta, cfg.estimator);
        let u = sample_direction(&mut self.directions, self.dim, kind.direction_kind())?;

        // The naive estimator needs f_{t-1}(x_t - δ u_t), so it queries before
        // the problem moves on. There is no f_{-1}; step 0 uses a zero
        // baseline, like residual feedback.
        let prev_minus = if kind == EstimatorKind::NaiveOnlineTwoPoint && t > 0 {
            let p = vecops::add_scaled(&self.x, -delta, u.components());
            Some(finite(t, bandit.query(&p, &mut self.noise)?)?)
        } else {
            None
        };
        if self.t > 0 {
            bandit.advance();
        }

        let query_point = vecops::add_scaled(&self.x, delta, u.components());
        let estimate: GradientEstimate = match kind {
            EstimatorKind::Residual => {
                let y = finite(t, bandit.query(&query_point, &mut self.noise)?)?;
                self.residual.step(y, &u, delta)?
            }
            EstimatorKind::ResidualSphere => {
                let y = finite(t, bandit.query(&query_point, &mut self.noise)?)?;
                self.residual.step_sphere(y, &u, delta, self.dim)?
            }
            EstimatorKind::OnePoint => {
                let y = finite(t, bandit.query(&query_point, &mut self.noise)?)?;
                one_point_from_value(y, delta, &u)
            }
            EstimatorKind::TwoPoint => {
                let mut replay = self.noise.clone();
                let plus = finite(t, bandit.query(&query_point, &mut self.noise)?)?;
                let base = finite(t, bandit.query(&self.x, &mut replay)?)?;
                two_point_from_values(plus, base, delta, &u)
            }
            EstimatorKind::NaiveOnlineTwoPoint => {
                let plus = finite(t, bandit.query(&query_point, &mut self.noise)?)?;
                let mut g = naive_online_two_point(plus, prev_minus.unwrap_or(0.0), delta, &u)?;
                if prev_minus.is_none() {
                    g.queries_used = 1;
                }
                g
            }
        };

        let problem = bandit.problem();
        let realized_cost = problem.true_cost(&self.x);
        let gradient_sq_norm = problem.gradient(&self.x).map(|g| vecops::norm_sq(&g));
        let next = apply_update(&self.iterate_set, &self.x, &estimate.vector, eta)?;
        let record = StepRecord {
            t: self.t,
            x: std::mem::replace(&mut self.x, next),
            query_point,
            value: estimate.raw_value,
            estimate_sq_norm: estimate.sq_norm(),
            estimate: estimate.vector,
            realized_cost,
            gradient_sq_norm,
            queries_used: estimate.queries_used,
        };
        self.t += 1;
        Ok(record)
    }
}

/// Runs `config.horizon` steps of the online loop against `problem`.
pub fn run(
    problem: &mut dyn OnlineProblem,
    config: &OptimizerConfig,
) -> std::result::Result<RunTrace, Box<AbortedRun>> {
    let mut trace = RunTrace::empty(config);
    let abort = |error: Error, trace: RunTrace| Box::new(AbortedRun { error, trace });

    let caps = problem.capabilities();
    if config.estimator.needs_double_query() && !caps.supports_double_query {
        return Err(abort(
            Error::QueryContract(format!(
                "{} needs two queries per step but the problem allows one",
                config.estimator
            )),
            trace,
        ));
    }
    let dim = problem.dimension();
    let mut optimizer = match Optimizer::new(config.clone(), dim) {
        Ok(o) => o,
        Err(e) => return Err(abort(e, trace)),
    };
    if let Some(l0) = caps.lipschitz_l0 {
        let alpha = contraction_rate(l0, config.eta, config.delta, dim, config.estimator.kernel());
        if alpha > 1.0 {
            trace.warnings.push(RunWarning::NoContraction { alpha });
        }
    }

    let mut bandit = Bandit::new(problem);
    trace.records.reserve(config.horizon);
    for _ in 0..config.horizon {
        match optimizer.step(&mut bandit) {
            Ok(record) => trace.records.push(record),
            Err(e) => {
                trace.final_x = optimizer.x().to_vec();
                trace.total_queries = bandit.total_queries();
                return Err(abort(e, trace));
            }
        }
    }
    trace.final_x = optimizer.x().to_vec();
    trace.total_queries = bandit.total_queries();
    Ok(trace)
}
