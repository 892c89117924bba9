//! Seeded multi-trial sweeps and their aggregation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use rfzo_core::feasible_sets::FeasibleSet;
use rfzo_core::metrics::{estimate_variation_constants, estimator_variance, loglog_slope_default, VariationEstimates};
use rfzo_core::optimizer::{run, EstimatorKind, OptimizerConfig, RunTrace};
use rfzo_core::problems::Capabilities;
use rfzo_core::sampling::{derive_seed, purpose_stream};

use crate::config::{
    has_errors, resolve_schedule, validate_config, Diagnostic, ExperimentConfig, ResolvedSchedule, ScheduleSpec,
};
use crate::RunnerError;

const PILOT_SALT: u64 = 0x70_696c_6f74;
const VARIATION_SAMPLES: usize = 16;

/// Fraction of the horizon averaged for the end-of-run cost.
pub const FINAL_WINDOW_FRACTION: f64 = 0.1;

/// Seeds of trial `trial`: one for the problem, one for the optimizer. All
/// estimators of a trial share both, so they see the same function sequence
/// and the same direction stream.
pub fn trial_seeds(base_seed: u64, trial: u64) -> (u64, u64) {
    let s = derive_seed(base_seed, trial);
    (derive_seed(s, 0), derive_seed(s, 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub eta: f64,
    /// Mean cost per step over the pilot runs; infinite when a run aborted.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortRecord {
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedCell {
    pub estimator: EstimatorKind,
    pub reason: String,
}

/// Per-step mean and sample standard deviation across trials.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Band {
    fn across(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        let len = rows.first()?.len();
        let mut band = Band::default();
        for t in 0..len {
            let mean = rows.iter().map(|r| r[t]).sum::<f64>() / n as f64;
            let var = if n > 1 {
                rows.iter().map(|r| (r[t] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            band.mean.push(mean);
            band.std.push(var.sqrt());
        }
        Some(band)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SeriesSet {
    pub static_regret: Option<Band>,
    pub absolute_regret: Option<Band>,
    pub realized_cost: Option<Band>,
    pub est_sq_norm: Option<Band>,
    pub gradient_regret: Option<Band>,
    pub estimator_variance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub schedule: ResolvedSchedule,
    /// Pilot scores when the step size came from a grid search.
    pub eta_grid: Vec<GridPoint>,
    pub completed_trials: usize,
    pub aborted: Vec<AbortRecord>,
    pub total_queries: u64,
    pub final_regret_mean: Option<f64>,
    pub final_abs_regret_mean: Option<f64>,
    pub regret_slope: Option<f64>,
    pub final_window_cost_mean: Option<f64>,
    pub median_variance: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub series: SeriesSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparatorInfo {
    /// `Σ_t f_t(x*)` of the best evaluated fixed decision, per trial.
    pub per_trial_total: Vec<f64>,
    pub mean_total: f64,
    /// The winning fixed decision of each trial.
    pub policies: Vec<Vec<f64>>,
    /// `f_t(x*)` of the winning decision at every step, per trial.
    #[serde(skip)]
    pub per_step: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub horizon: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub dimension: usize,
    pub capabilities: Capabilities,
    pub estimators: Vec<EstimatorSummary>,
    pub skipped: Vec<SkippedCell>,
    pub comparator: Option<ComparatorInfo>,
    /// Plug-in variation constants along the first trial of the first
    /// estimator run.
    pub variation: Option<VariationEstimates>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Summary {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub summary: Summary,
    /// Traces per estimator, indexed by trial. Aborted runs keep their
    /// partial traces.
    pub traces: BTreeMap<EstimatorKind, Vec<RunTrace>>,
}

struct Cell<'a> {
    config: &'a ExperimentConfig,
    set: &'a FeasibleSet,
    x0: &'a [f64],
}

impl Cell<'_> {
    fn run(
        &self,
        kind: EstimatorKind,
        schedule: &ResolvedSchedule,
        problem_seed: u64,
        optimizer_seed: u64,
        horizon: usize,
    ) -> Result<(RunTrace, Option<String>), RunnerError> {
        let mut problem = self.config.problem.build(self.config.preset, problem_seed)?;
        let cfg = OptimizerConfig {
            estimator: kind,
            eta: schedule.eta,
            delta: schedule.delta,
            xi: schedule.xi,
            horizon,
            set: self.set.clone(),
            x0: self.x0.to_vec(),
            seed: optimizer_seed,
        };
        Ok(match run(problem.as_mut(), &cfg) {
            Ok(trace) => (trace, None),
            Err(aborted) => {
                let message = aborted.error.to_string();
                (aborted.trace, Some(message))
            }
        })
    }
}

fn mean_step_cost(trace: &RunTrace) -> f64 {
    let costs: Vec<f64> = trace
        .records
        .iter()
        .map(|r| r.realized_cost.unwrap_or(r.value))
        .collect();
    if costs.is_empty() {
        return f64::INFINITY;
    }
    let m = costs.iter().sum::<f64>() / costs.len() as f64;
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

fn grid_search(
    cell: &Cell<'_>,
    kind: EstimatorKind,
    base: ResolvedSchedule,
    etas: &[f64],
    pilots: usize,
) -> Result<(ResolvedSchedule, Vec<GridPoint>), RunnerError> {
    let pilot_base = cell.config.base_seed ^ PILOT_SALT;
    let jobs: Vec<(usize, usize)> = (0..etas.len()).flat_map(|e| (0..pilots).map(move |p| (e, p))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(e, p)| {
            let (ps, os) = trial_seeds(pilot_base, p as u64);
            let sched = ResolvedSchedule { eta: etas[e], ..base };
            let (trace, aborted) = cell.run(kind, &sched, ps, os, cell.config.horizon)?;
            Ok(if aborted.is_some() {
                f64::INFINITY
            } else {
                mean_step_cost(&trace)
            })
        })
        .collect::<Result<_, RunnerError>>()?;
    let grid: Vec<GridPoint> = etas
        .iter()
        .enumerate()
        .map(|(e, &eta)| GridPoint {
            eta,
            score: scores[e * pilots..(e + 1) * pilots].iter().sum::<f64>() / pilots as f64,
        })
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.score.total_cmp(&b.1.score).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok((
        ResolvedSchedule {
            eta: etas[best],
            ..base
        },
        grid,
    ))
}

struct TrialOutcome {
    runs: Vec<(RunTrace, Option<String>)>,
    comparator: Option<Comparator>,
}

#[derive(Clone)]
struct Comparator {
    total: f64,
    policy: Vec<f64>,
    per_step: Vec<f64>,
}

/// Best fixed decision among the starting point, every run's final and
/// averaged iterate, and (when optima are exposed) the projected centroid of
/// the per-step optima, scored on a replay of the trial's sequence.
fn comparator(
    cell: &Cell<'_>,
    problem_seed: u64,
    runs: &[(RunTrace, Option<String>)],
) -> Result<Option<Comparator>, RunnerError> {
    let config = cell.config;
    let horizon = config.horizon;
    let mut candidates = vec![cell.set.project(cell.x0).map_err(core_err)?];
    for (trace, _) in runs {
        candidates.push(trace.final_x.clone());
        if !trace.records.is_empty() {
            let n = trace.records.len() as f64;
            let mut avg = vec![0.0; cell.x0.len()];
            for r in &trace.records {
                for (a, v) in avg.iter_mut().zip(&r.x) {
                    *a += v / n;
                }
            }
            candidates.push(avg);
        }
    }
    let mut problem = config.problem.build(config.preset, problem_seed)?;
    if problem.capabilities().exposes_optimum {
        let mut centroid = vec![0.0; cell.x0.len()];
        for t in 0..horizon {
            if t > 0 {
                problem.advance();
            }
            if let Some(opt) = problem.optimum() {
                for (c, v) in centroid.iter_mut().zip(&opt) {
                    *c += v / horizon as f64;
                }
            }
        }
        candidates.push(cell.set.project(&centroid).map_err(core_err)?);
        problem = config.problem.build(config.preset, problem_seed)?;
    }
    let mut steps = vec![Vec::with_capacity(horizon); candidates.len()];
    for t in 0..horizon {
        if t > 0 {
            problem.advance();
        }
        for (row, c) in steps.iter_mut().zip(&candidates) {
            match problem.true_cost(c) {
                Some(v) => row.push(v),
                None => return Ok(None),
            }
        }
    }
    Ok(steps
        .into_iter()
        .zip(candidates)
        .map(|(per_step, policy)| Comparator {
            total: per_step.iter().sum(),
            policy,
            per_step,
        })
        .filter(|c| c.total.is_finite())
        .min_by(|a, b| a.total.total_cmp(&b.total)))
}

/// Per-step estimator variance over every run still alive at that step, so
/// aborted runs contribute their partial traces. Stops at the first step
/// with fewer than two live runs.
fn alive_variance<'a>(traces: impl Iterator<Item = &'a RunTrace>) -> Option<Vec<f64>> {
    let traces: Vec<&RunTrace> = traces.collect();
    let mut out = Vec::new();
    for t in 0.. {
        let rows: Vec<Vec<Vec<f64>>> = traces
            .iter()
            .filter_map(|tr| tr.records.get(t))
            .filter(|r| r.estimate.iter().all(|v| v.is_finite()))
            .map(|r| vec![r.estimate.clone()])
            .collect();
        if rows.len() < 2 {
            break;
        }
        out.extend(estimator_variance(&rows).ok()?);
    }
    (!out.is_empty()).then_some(out)
}

fn core_err(e: rfzo_core::Error) -> RunnerError {
    RunnerError::Config(e.to_string())
}

fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn cumulative(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Runs every (estimator, trial) cell of `config` and aggregates the result.
/// Nothing is written to disk.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, RunnerError> {
    let diagnostics = validate_config(config);
    if has_errors(&diagnostics) {
        let msgs: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
        return Err(RunnerError::Config(msgs.join("; ")));
    }
    let probe = config.problem.build(config.preset, config.base_seed)?;
    let dim = probe.dimension();
    let caps = probe.capabilities();
    drop(probe);
    let set = config.feasible_set()?;
    let x0 = config.starting_point(dim);
    let cell = Cell {
        config,
        set: &set,
        x0: &x0,
    };

    let mut active = Vec::new();
    let mut skipped = Vec::new();
    for &kind in &config.estimators {
        if kind.needs_double_query() && !caps.supports_double_query {
            skipped.push(SkippedCell {
                estimator: kind,
                reason: "needs two queries per step; the problem allows one".into(),
            });
            continue;
        }
        if active.iter().any(|(k, _, _)| *k == kind) {
            continue;
        }
        let base = resolve_schedule(config, kind, dim, caps.lipschitz_l0)?;
        let (schedule, grid) = match &config.schedule {
            ScheduleSpec::GridSearch { etas, pilot_trials, .. } => grid_search(&cell, kind, base, etas, *pilot_trials)?,
            _ => (base, Vec::new()),
        };
        active.push((kind, schedule, grid));
    }

    let replayable = config.problem.replayable() && caps.exposes_true_cost;
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let (ps, os) = trial_seeds(config.base_seed, trial as u64);
            let runs = active
                .iter()
                .map(|(kind, schedule, _)| cell.run(*kind, schedule, ps, os, config.horizon))
                .collect::<Result<Vec<_>, _>>()?;
            let comparator = if replayable {
                comparator(&cell, ps, &runs)?
            } else {
                None
            };
            Ok(TrialOutcome { runs, comparator })
        })
        .collect::<Result<_, RunnerError>>()?;

    let comparator_info = if replayable && outcomes.iter().all(|o| o.comparator.is_some()) {
        let per_trial: Vec<Comparator> = outcomes.iter().map(|o| o.comparator.clone().unwrap()).collect();
        let totals: Vec<f64> = per_trial.iter().map(|c| c.total).collect();
        Some(ComparatorInfo {
            mean_total: totals.iter().sum::<f64>() / totals.len() as f64,
            per_trial_total: totals,
            policies: per_trial.iter().map(|c| c.policy.clone()).collect(),
            per_step: per_trial.into_iter().map(|c| c.per_step).collect(),
        })
    } else {
        None
    };

    let variation = match (replayable, active.first(), outcomes.first()) {
        (true, Some((_, schedule, _)), Some(outcome)) if outcome.runs[0].1.is_none() => {
            let trace = &outcome.runs[0].0;
            let (ps, os) = trial_seeds(config.base_seed, 0);
            let mut problem = config.problem.build(config.preset, ps)?;
            let iterates: Vec<Vec<f64>> = trace.records.iter().map(|r| r.x.clone()).collect();
            let queries: Vec<Vec<f64>> = trace.records.iter().map(|r| r.query_point.clone()).collect();
            let mut rng = purpose_stream(os, 7);
            estimate_variation_constants(
                problem.as_mut(),
                &iterates,
                &queries,
                schedule.delta,
                VARIATION_SAMPLES,
                &mut rng,
            )
            .ok()
        }
        _ => None,
    };

    let mut traces = BTreeMap::new();
    let mut estimators = Vec::new();
    for (idx, (kind, schedule, grid)) in active.into_iter().enumerate() {
        let runs: Vec<&(RunTrace, Option<String>)> = outcomes.iter().map(|o| &o.runs[idx]).collect();
        let aborted: Vec<AbortRecord> = runs
            .iter()
            .enumerate()
            .filter_map(|(trial, (_, e))| {
                e.as_ref().map(|e| AbortRecord {
                    trial,
                    error: e.clone(),
                })
            })
            .collect();
        let complete: Vec<(usize, &RunTrace)> = runs
            .iter()
            .enumerate()
            .filter(|(_, (_, e))| e.is_none())
            .map(|(i, (t, _))| (i, t))
            .collect();

        let costs: Option<Vec<Vec<f64>>> = complete.iter().map(|(_, t)| t.realized_costs()).collect();
        let realized_cost = costs.as_deref().and_then(Band::across);
        let static_regret = match (&costs, &comparator_info) {
            (Some(costs), Some(info)) => {
                let rows: Vec<Vec<f64>> = complete
                    .iter()
                    .zip(costs)
                    .map(|((trial, _), c)| {
                        let share = info.per_trial_total[*trial] / config.horizon as f64;
                        cumulative(c.iter().copied())
                            .into_iter()
                            .enumerate()
                            .map(|(t, v)| v - share * (t + 1) as f64)
                            .collect()
                    })
                    .collect();
                Band::across(&rows)
            }
            _ => None,
        };
        let absolute = match (&costs, &comparator_info) {
            (Some(costs), Some(info)) => {
                let rows: Vec<Vec<f64>> = complete
                    .iter()
                    .zip(costs)
                    .map(|((trial, _), c)| cumulative(c.iter().zip(&info.per_step[*trial]).map(|(a, b)| (a - b).abs())))
                    .collect();
                Band::across(&rows)
            }
            _ => None,
        };
        let sq_norms: Vec<Vec<f64>> = complete
            .iter()
            .map(|(_, t)| t.records.iter().map(|r| r.estimate_sq_norm).collect())
            .collect();
        let grads: Option<Vec<Vec<f64>>> = complete
            .iter()
            .map(|(_, t)| {
                let g: Option<Vec<f64>> = t.records.iter().map(|r| r.gradient_sq_norm).collect();
                g.map(|g| cumulative(g.into_iter()))
            })
            .collect();
        let variance = alive_variance(runs.iter().map(|(t, _)| t));

        let window = ((config.horizon as f64 * FINAL_WINDOW_FRACTION).ceil() as usize).max(1);
        let final_window_cost_mean = realized_cost.as_ref().map(|b| {
            let tail = &b.mean[b.mean.len() - window.min(b.mean.len())..];
            tail.iter().sum::<f64>() / tail.len() as f64
        });
        let mut warnings: Vec<String> = Vec::new();
        if let Some((_, first)) = complete.first() {
            for w in &first.warnings {
                warnings.push(format!("{w:?}"));
            }
        }
        let series = SeriesSet {
            static_regret,
            absolute_regret: absolute,
            realized_cost,
            est_sq_norm: Band::across(&sq_norms),
            gradient_regret: grads.as_deref().and_then(Band::across),
            estimator_variance: variance,
        };
        estimators.push(EstimatorSummary {
            estimator: kind,
            schedule,
            eta_grid: grid,
            completed_trials: complete.len(),
            aborted,
            total_queries: runs.iter().map(|(t, _)| t.total_queries).sum(),
            final_regret_mean: series.static_regret.as_ref().and_then(|b| b.mean.last().copied()),
            final_abs_regret_mean: series.absolute_regret.as_ref().and_then(|b| b.mean.last().copied()),
            regret_slope: series
                .static_regret
                .as_ref()
                .and_then(|b| loglog_slope_default(&b.mean).ok()),
            final_window_cost_mean,
            median_variance: series.estimator_variance.as_deref().and_then(median),
            warnings,
            series,
        });
        traces.insert(kind, runs.into_iter().map(|(t, _)| t.clone()).collect());
    }

    Ok(ExperimentResult {
        config: config.clone(),
        summary: Summary {
            horizon: config.horizon,
            trials: config.trials,
            base_seed: config.base_seed,
            dimension: dim,
            capabilities: caps,
            estimators,
            skipped,
            comparator: comparator_info,
            variation,
            diagnostics,
        },
        traces,
    })
}
