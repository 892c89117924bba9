//! Experiment configuration: the JSON schema, problem construction and
//! pre-flight validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use rfzo_core::feasible_sets::{FeasibleSet, SetShape};
use rfzo_core::optimizer::EstimatorKind;
use rfzo_core::problems::{
    BoundedVariationAdversary, ConstantProblem, DriftingQuadratic, DriftingQuadraticConfig, LqrConfig, LqrEnv,
    OnlineProblem, RandomWalkOffset, ResourceGridConfig, ResourceGridEnv,
};
use rfzo_core::sampling::derive_seed;
use rfzo_core::schedules::{
    contraction_rate, convex_lipschitz_schedule, convex_smooth_schedule, nonconvex_lipschitz_schedule,
    nonconvex_smooth_schedule, sphere_convex_schedule, Schedule, TheoremTag,
};
use rfzo_core::smoothing::Kernel;

use crate::RunnerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Full-size environments.
    Paper,
    /// Reduced environments that run in seconds.
    Desk,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        })
    }
}

fn default_center_bound() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Constant {
        dim: usize,
        value: f64,
    },
    DriftingQuadratic {
        dim: usize,
        drift_rate: f64,
        /// Defaults to the origin.
        #[serde(default)]
        initial_center: Option<Vec<f64>>,
        /// Centers stay within this distance of the origin.
        #[serde(default = "default_center_bound")]
        center_bound: f64,
        /// Region for the reported constants; defaults to `center_bound + 1`.
        #[serde(default)]
        region_radius: Option<f64>,
        #[serde(default)]
        noise_std: f64,
    },
    RandomWalkOffset {
        base: Box<ProblemSpec>,
        noise_std: f64,
        #[serde(default)]
        initial_offset: f64,
    },
    Adversary {
        base: Box<ProblemSpec>,
        v_f: f64,
    },
    Lqr {
        #[serde(default)]
        preset: Option<Preset>,
        /// Fields replacing the preset's values.
        #[serde(default)]
        overrides: Map<String, Value>,
    },
    ResourceGrid {
        #[serde(default)]
        preset: Option<Preset>,
        #[serde(default)]
        overrides: Map<String, Value>,
    },
}

fn with_overrides<T>(base: T, overrides: &Map<String, Value>, what: &str) -> Result<T, RunnerError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut value = serde_json::to_value(base).expect("config serializes");
    let fields = value.as_object_mut().expect("config is an object");
    for (k, v) in overrides {
        if k == "seed" {
            return Err(RunnerError::Config(format!(
                "{what}.overrides.seed: seeds are derived from base_seed"
            )));
        }
        if !fields.contains_key(k) {
            return Err(RunnerError::Config(format!("{what}.overrides: unknown field `{k}`")));
        }
        fields.insert(k.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| RunnerError::Config(format!("{what}.overrides: {e}")))
}

impl ProblemSpec {
    /// Whether the function sequence is independent of the learner, so a
    /// fresh instance with the same seed replays it.
    pub fn replayable(&self) -> bool {
        match self {
            ProblemSpec::Adversary { .. } => false,
            ProblemSpec::RandomWalkOffset { base, .. } => base.replayable(),
            _ => true,
        }
    }

    pub fn lqr_config(&self, preset: Option<Preset>, seed: u64) -> Result<Option<LqrConfig>, RunnerError> {
        let ProblemSpec::Lqr { preset: own, overrides } = self else {
            return Ok(None);
        };
        let base = match preset.or(*own).unwrap_or(Preset::Desk) {
            Preset::Paper => LqrConfig::paper(seed),
            Preset::Desk => LqrConfig::desk(seed),
        };
        with_overrides(base, overrides, "problem").map(Some)
    }

    pub fn grid_config(&self, preset: Option<Preset>, seed: u64) -> Result<Option<ResourceGridConfig>, RunnerError> {
        let ProblemSpec::ResourceGrid { preset: own, overrides } = self else {
            return Ok(None);
        };
        let base = match preset.or(*own).unwrap_or(Preset::Desk) {
            Preset::Paper => ResourceGridConfig::paper(seed),
            Preset::Desk => ResourceGridConfig::desk(seed),
        };
        with_overrides(base, overrides, "problem").map(Some)
    }

    /// Instantiates the problem. `preset` overrides the problem's own preset.
    pub fn build(&self, preset: Option<Preset>, seed: u64) -> Result<Box<dyn OnlineProblem>, RunnerError> {
        let bad = |msg: String| Err(RunnerError::Config(msg));
        Ok(match self {
            ProblemSpec::Constant { dim, value } => {
                if *dim == 0 {
                    return bad("problem.dim: must be at least 1".into());
                }
                Box::new(ConstantProblem::new(*dim, *value))
            }
            ProblemSpec::DriftingQuadratic {
                dim,
                drift_rate,
                initial_center,
                center_bound,
                region_radius,
                noise_std,
            } => {
                let initial_center = initial_center.clone().unwrap_or_else(|| vec![0.0; *dim]);
                if *dim == 0 || initial_center.len() != *dim {
                    return bad(format!("problem.initial_center: expected {dim} components"));
                }
                if !(*drift_rate >= 0.0 && *center_bound > 0.0 && *noise_std >= 0.0) {
                    return bad("problem: drift_rate, noise_std must be >= 0 and center_bound > 0".into());
                }
                Box::new(DriftingQuadratic::new(DriftingQuadraticConfig {
                    dim: *dim,
                    drift_rate: *drift_rate,
                    initial_center,
                    center_bound: *center_bound,
                    region_radius: region_radius.unwrap_or(center_bound + 1.0),
                    noise_std: *noise_std,
                    seed,
                }))
            }
            ProblemSpec::RandomWalkOffset {
                base,
                noise_std,
                initial_offset,
            } => {
                if !(*noise_std >= 0.0) {
                    return bad("problem.noise_std: must be >= 0".into());
                }
                let inner = base.build(preset, derive_seed(seed, 0))?;
                Box::new(
                    RandomWalkOffset::new(inner, *noise_std, derive_seed(seed, 1)).with_initial_offset(*initial_offset),
                )
            }
            ProblemSpec::Adversary { base, v_f } => {
                if !(*v_f >= 0.0) {
                    return bad("problem.v_f: must be >= 0".into());
                }
                Box::new(BoundedVariationAdversary::new(base.build(preset, seed)?, *v_f))
            }
            ProblemSpec::Lqr { .. } => Box::new(LqrEnv::new(self.lqr_config(preset, seed)?.expect("lqr spec"))),
            ProblemSpec::ResourceGrid { .. } => Box::new(ResourceGridEnv::new(
                self.grid_config(preset, seed)?.expect("grid spec"),
            )),
        })
    }
}

/// A feasible set in JSON: the shape plus optional inner/outer radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    #[serde(flatten)]
    pub shape: SetShape,
    #[serde(default)]
    pub inner_radius: Option<f64>,
    #[serde(default)]
    pub outer_radius: Option<f64>,
}

impl SetSpec {
    pub fn to_set(&self) -> Result<FeasibleSet, RunnerError> {
        let err = |e: rfzo_core::Error| RunnerError::Config(format!("set: {e}"));
        let base = match &self.shape {
            SetShape::Unconstrained => FeasibleSet::unconstrained(),
            SetShape::Box { lo, hi } => FeasibleSet::boxed(lo.clone(), hi.clone()).map_err(err)?,
            SetShape::Ball { center, radius } => FeasibleSet::ball(center.clone(), *radius).map_err(err)?,
        };
        match (self.inner_radius, self.outer_radius) {
            (None, None) => Ok(base),
            (Some(r), Some(rbar)) => base.with_radii(r, rbar).map_err(err),
            _ => Err(RunnerError::Config(
                "set: inner_radius and outer_radius must be given together".into(),
            )),
        }
    }
}

fn default_pilot_trials() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Explicit {
        eta: f64,
        delta: f64,
        /// Shrink factor for the sphere variant; defaults to `delta / r`.
        #[serde(default)]
        xi: Option<f64>,
        /// Per-estimator step sizes replacing `eta`.
        #[serde(default)]
        eta_by_estimator: BTreeMap<EstimatorKind, f64>,
    },
    Theorem {
        theorem: TheoremTag,
        /// Lipschitz constant; defaults to the problem's own.
        #[serde(default)]
        l0: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        q: f64,
        #[serde(default)]
        eps_f: Option<f64>,
    },
    /// Picks, per estimator, the step size with the lowest mean cost over
    /// short pilot runs on seeds disjoint from the evaluation trials.
    GridSearch {
        etas: Vec<f64>,
        delta: f64,
        #[serde(default)]
        xi: Option<f64>,
        #[serde(default = "default_pilot_trials")]
        pilot_trials: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub estimators: Vec<EstimatorKind>,
    pub schedule: ScheduleSpec,
    pub horizon: usize,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Defaults to unconstrained.
    #[serde(default)]
    pub set: Option<SetSpec>,
    /// Defaults to the origin.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Overrides the problem's own preset.
    #[serde(default)]
    pub preset: Option<Preset>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        serde_json::from_str(text).map_err(|e| RunnerError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn feasible_set(&self) -> Result<FeasibleSet, RunnerError> {
        self.set
            .as_ref()
            .map_or(Ok(FeasibleSet::unconstrained()), SetSpec::to_set)
    }

    pub fn starting_point(&self, dim: usize) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; dim])
    }
}

/// Step size, exploration radius and shrink factor for one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedSchedule {
    pub eta: f64,
    pub delta: f64,
    pub xi: f64,
    /// Contraction rate for the problem's `L0`, when known.
    pub alpha: Option<f64>,
    pub min_horizon: Option<f64>,
}

fn kernel_of(kind: EstimatorKind) -> Kernel {
    match kind {
        EstimatorKind::ResidualSphere => Kernel::UnitBall,
        _ => Kernel::Gaussian,
    }
}

fn default_xi(set: &FeasibleSet, delta: f64) -> f64 {
    set.inner_radius().map_or(0.0, |r| delta / r)
}

/// Resolves `(η, δ, ξ)` for `kind` from everything but a grid search; grid
/// searches resolve to their first step size here.
pub fn resolve_schedule(
    config: &ExperimentConfig,
    kind: EstimatorKind,
    dim: usize,
    l0: Option<f64>,
) -> Result<ResolvedSchedule, RunnerError> {
    let set = config.feasible_set()?;
    let alpha_for = |eta: f64, delta: f64| l0.map(|l| contraction_rate(l, eta, delta, dim, kernel_of(kind)));
    match &config.schedule {
        ScheduleSpec::Explicit {
            eta,
            delta,
            xi,
            eta_by_estimator,
        } => {
            let eta = eta_by_estimator.get(&kind).copied().unwrap_or(*eta);
            Ok(ResolvedSchedule {
                eta,
                delta: *delta,
                xi: xi.unwrap_or_else(|| default_xi(&set, *delta)),
                alpha: alpha_for(eta, *delta),
                min_horizon: None,
            })
        }
        ScheduleSpec::GridSearch { etas, delta, xi, .. } => {
            let eta = *etas
                .first()
                .ok_or_else(|| RunnerError::Config("schedule.etas: empty grid".into()))?;
            Ok(ResolvedSchedule {
                eta,
                delta: *delta,
                xi: xi.unwrap_or_else(|| default_xi(&set, *delta)),
                alpha: alpha_for(eta, *delta),
                min_horizon: None,
            })
        }
        ScheduleSpec::Theorem {
            theorem,
            l0: given,
            radius,
            q,
            eps_f,
        } => {
            let l = given.or(l0).ok_or_else(|| {
                RunnerError::Config("schedule.l0: the problem does not report L0, so it must be given".into())
            })?;
            let t = config.horizon;
            let s: Schedule = match theorem {
                TheoremTag::ConvexLipschitz => convex_lipschitz_schedule(l, *radius, dim, t, *q),
                TheoremTag::ConvexSmooth => convex_smooth_schedule(l, *radius, dim, t),
                TheoremTag::NonconvexLipschitz => {
                    let eps = eps_f.ok_or_else(|| RunnerError::Config("schedule.eps_f: required".into()))?;
                    nonconvex_lipschitz_schedule(l, eps, dim, t)
                }
                TheoremTag::NonconvexSmooth => nonconvex_smooth_schedule(l, dim, t),
                TheoremTag::SphereConvex => {
                    let (Some(r), Some(rbar)) = (set.inner_radius(), set.outer_radius()) else {
                        return Err(RunnerError::Config(
                            "set: the sphere schedule needs inner and outer radii".into(),
                        ));
                    };
                    sphere_convex_schedule(l, rbar, r, dim, t, *q)
                }
            }
            .map_err(|e| RunnerError::Config(format!("schedule: {e}")))?;
            Ok(ResolvedSchedule {
                eta: s.eta,
                delta: s.delta,
                xi: s.xi.unwrap_or_else(|| default_xi(&set, s.delta)),
                alpha: Some(contraction_rate(l, s.eta, s.delta, dim, kernel_of(kind))),
                min_horizon: Some(s.min_horizon),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.field, self.message)
    }
}

/// Pre-flight checks. Errors make the config unrunnable; warnings flag
/// schedules outside the regime the bounds cover.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |severity, field: &str, message: String| {
        out.push(Diagnostic {
            severity,
            field: field.into(),
            message,
        })
    };
    if config.trials == 0 {
        push(Severity::Error, "trials", "must be at least 1".into());
    }
    if config.horizon == 0 {
        push(Severity::Error, "horizon", "must be at least 1".into());
    }
    if config.estimators.is_empty() {
        push(Severity::Error, "estimators", "list is empty".into());
    }
    let problem = match config.problem.build(config.preset, config.base_seed) {
        Ok(p) => p,
        Err(e) => {
            push(Severity::Error, "problem", e.to_string());
            return out;
        }
    };
    let dim = problem.dimension();
    let caps = problem.capabilities();
    let set = match config.feasible_set() {
        Ok(s) => s,
        Err(e) => {
            push(Severity::Error, "set", e.to_string());
            return out;
        }
    };
    if let Some(d) = set.dimension() {
        if d != dim {
            push(
                Severity::Error,
                "set",
                format!("dimension {d} does not match the problem's {dim}"),
            );
        }
    }
    if let Some(x0) = &config.x0 {
        if x0.len() != dim {
            push(
                Severity::Error,
                "x0",
                format!("has {} components, the problem has {dim}", x0.len()),
            );
        }
    }
    if let ScheduleSpec::GridSearch { etas, pilot_trials, .. } = &config.schedule {
        if etas.is_empty() || etas.iter().any(|e| !(*e >= 0.0)) {
            push(
                Severity::Error,
                "schedule.etas",
                "needs at least one non-negative step size".into(),
            );
        }
        if *pilot_trials == 0 {
            push(Severity::Error, "schedule.pilot_trials", "must be at least 1".into());
        }
    }

    for &kind in &config.estimators {
        let field = format!("estimators.{kind}");
        if kind.needs_double_query() && !caps.supports_double_query {
            push(
                Severity::Warning,
                &field,
                "needs two queries per step but the problem allows one; the cell will be skipped".into(),
            );
        }
        if kind == EstimatorKind::ResidualSphere && set.inner_radius().is_none() {
            push(
                Severity::Error,
                &field,
                "the sphere variant needs a set with inner and outer radii".into(),
            );
            continue;
        }
        let resolved = match resolve_schedule(config, kind, dim, caps.lipschitz_l0) {
            Ok(r) => r,
            Err(e) => {
                push(Severity::Error, "schedule", e.to_string());
                continue;
            }
        };
        if !(resolved.delta > 0.0) {
            push(Severity::Error, "schedule.delta", "must be positive".into());
        }
        if let Some(alpha) = resolved.alpha {
            if alpha > 0.5 {
                push(
                    Severity::Warning,
                    &field,
                    format!("contraction rate alpha = {alpha} exceeds 1/2"),
                );
            }
        }
        if let Some(min) = resolved.min_horizon {
            if (config.horizon as f64) <= min {
                push(
                    Severity::Warning,
                    "horizon",
                    format!(
                        "T = {} is not above the schedule's minimum horizon {min}",
                        config.horizon
                    ),
                );
            }
        }
        if kind == EstimatorKind::ResidualSphere {
            match set.feasibility_margin(resolved.xi, resolved.delta) {
                Ok(true) => {}
                _ => push(
                    Severity::Error,
                    "schedule.xi",
                    format!("xi = {} is below delta / r", resolved.xi),
                ),
            }
        }
    }
    out
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

/// Named starting configurations shown by `list-presets`.
pub fn example_configs() -> Vec<(&'static str, &'static str, ExperimentConfig)> {
    let lqr = |preset, etas: &[f64], delta| ExperimentConfig {
        problem: ProblemSpec::Lqr {
            preset: Some(preset),
            overrides: Map::new(),
        },
        estimators: vec![
            EstimatorKind::Residual,
            EstimatorKind::OnePoint,
            EstimatorKind::TwoPoint,
        ],
        schedule: ScheduleSpec::GridSearch {
            etas: etas.to_vec(),
            delta,
            xi: None,
            pilot_trials: 5,
        },
        horizon: 500,
        trials: 10,
        base_seed: 0,
        out_dir: None,
        set: None,
        x0: None,
        preset: None,
    };
    let grid = |preset| ExperimentConfig {
        problem: ProblemSpec::ResourceGrid {
            preset: Some(preset),
            overrides: Map::new(),
        },
        estimators: vec![
            EstimatorKind::Residual,
            EstimatorKind::OnePoint,
            EstimatorKind::TwoPoint,
        ],
        schedule: ScheduleSpec::GridSearch {
            etas: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
            delta: 0.1,
            xi: None,
            pilot_trials: 10,
        },
        horizon: 300,
        trials: 10,
        base_seed: 0,
        out_dir: None,
        set: None,
        x0: None,
        preset: None,
    };
    vec![
        (
            "lqr-paper",
            "nonstationary LQR, 6x6, H = 50",
            lqr(Preset::Paper, &[3e-6, 1e-5, 3e-5, 1e-4], 0.005),
        ),
        (
            "lqr-desk",
            "nonstationary LQR, 3x3, H = 20",
            lqr(Preset::Desk, &[1e-5, 3e-5, 1e-4, 2e-4, 3e-4, 4e-4], 0.03),
        ),
        (
            "grid-paper",
            "resource sharing on a 4x4 grid, H = 30",
            grid(Preset::Paper),
        ),
        (
            "grid-desk",
            "resource sharing on a 2x2 grid, H = 10",
            grid(Preset::Desk),
        ),
    ]
}
