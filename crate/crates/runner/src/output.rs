//! On-disk artifacts. Floats are written with Rust's shortest round-trip
//! formatting so that a value read back is bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use rfzo_core::optimizer::RunTrace;
use rfzo_core::vecops;

use crate::experiment::{trial_seeds, Band, EstimatorSummary, ExperimentResult};
use crate::RunnerError;

pub const TRACE_HEADER: &str = "trial,t,x_norm,f_value,realized_cost,est_sq_norm,queries";
pub const SUMMARY_HEADER: &str = "estimator,metric,t,mean,std";

pub fn trace_file_name(estimator: &str) -> String {
    format!("traces_{estimator}.csv")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn traces_csv(traces: &[RunTrace]) -> String {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (trial, trace) in traces.iter().enumerate() {
        for r in &trace.records {
            writeln!(
                out,
                "{trial},{},{},{},{},{},{}",
                r.t,
                vecops::norm(&r.x),
                r.value,
                opt(r.realized_cost),
                r.estimate_sq_norm,
                r.queries_used
            )
            .unwrap();
        }
    }
    out
}

fn band_rows(out: &mut String, name: &str, metric: &str, band: &Band) {
    for (t, (m, s)) in band.mean.iter().zip(&band.std).enumerate() {
        writeln!(out, "{name},{metric},{t},{m},{s}").unwrap();
    }
}

fn estimator_rows(out: &mut String, e: &EstimatorSummary, horizon: usize) {
    let name = e.estimator.name();
    let s = &e.series;
    if let Some(b) = &s.static_regret {
        band_rows(out, name, "static_regret", b);
    }
    if let Some(b) = &s.absolute_regret {
        band_rows(out, name, "absolute_regret", b);
    }
    if let Some(b) = &s.realized_cost {
        band_rows(out, name, "realized_cost", b);
    }
    if let Some(b) = &s.est_sq_norm {
        band_rows(out, name, "est_sq_norm", b);
    }
    if let Some(b) = &s.gradient_regret {
        band_rows(out, name, "gradient_regret", b);
    }
    if let Some(v) = &s.estimator_variance {
        for (t, v) in v.iter().enumerate() {
            writeln!(out, "{name},estimator_variance,{t},{v},").unwrap();
        }
    }
    let scalars = [
        ("eta", Some(e.schedule.eta)),
        ("delta", Some(e.schedule.delta)),
        ("xi", Some(e.schedule.xi)),
        ("alpha", e.schedule.alpha),
        ("final_regret", e.final_regret_mean),
        ("final_abs_regret", e.final_abs_regret_mean),
        ("regret_slope", e.regret_slope),
        ("final_window_cost", e.final_window_cost_mean),
        ("median_variance", e.median_variance),
        ("total_queries", Some(e.total_queries as f64)),
        ("completed_trials", Some(e.completed_trials as f64)),
        ("aborted_trials", Some(e.aborted.len() as f64)),
    ];
    for (metric, v) in scalars {
        if let Some(v) = v {
            writeln!(out, "{name},{metric},{horizon},{v},").unwrap();
        }
    }
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    let summary = &result.summary;
    for e in &summary.estimators {
        estimator_rows(&mut out, e, summary.horizon);
    }
    for s in &summary.skipped {
        writeln!(out, "{},skipped,,,", s.estimator.name()).unwrap();
    }
    out
}

/// Problem parameters of every trial, as instantiated.
pub fn environment_json(result: &ExperimentResult) -> Result<serde_json::Value, RunnerError> {
    let config = &result.config;
    let mut trials = Vec::new();
    for trial in 0..config.trials as u64 {
        let (problem_seed, optimizer_seed) = trial_seeds(config.base_seed, trial);
        let mut entry = json!({
            "trial": trial,
            "problem_seed": problem_seed,
            "optimizer_seed": optimizer_seed,
        });
        if let Some(lqr) = config.problem.lqr_config(config.preset, problem_seed)? {
            entry["lqr"] = serde_json::to_value(lqr).expect("serializable");
        }
        if let Some(grid) = config.problem.grid_config(config.preset, problem_seed)? {
            entry["resource_grid"] = serde_json::to_value(grid).expect("serializable");
        }
        trials.push(entry);
    }
    Ok(json!({
        "problem": config.problem,
        "preset": config.preset,
        "dimension": result.summary.dimension,
        "capabilities": result.summary.capabilities,
        "set": config.feasible_set()?,
        "x0": config.starting_point(result.summary.dimension),
        "trials": trials,
    }))
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf, RunnerError> {
    fs::write(&path, contents).map_err(|e| RunnerError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Writes traces, summaries, the environment dump and the resolved config
/// into `dir`. Returns the paths written.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    fs::create_dir_all(dir).map_err(|e| RunnerError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (kind, traces) in &result.traces {
        written.push(write(dir.join(trace_file_name(kind.name())), &traces_csv(traces))?);
    }
    written.push(write(dir.join("summary.csv"), &summary_csv(result))?);
    let pretty = |v: &serde_json::Value| serde_json::to_string_pretty(v).expect("json") + "\n";
    let summary = serde_json::to_value(&result.summary).expect("summary serializes");
    written.push(write(dir.join("summary.json"), &pretty(&summary))?);
    written.push(write(
        dir.join("environment.json"),
        &pretty(&environment_json(result)?),
    )?);
    let config = serde_json::to_value(&result.config).expect("config serializes");
    written.push(write(dir.join("config.json"), &pretty(&config))?);
    Ok(written)
}
