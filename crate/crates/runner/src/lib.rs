//! Experiment harness: JSON configs, seeded multi-trial sweeps over
//! estimators, and CSV/JSON artifacts.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{validate_config, Diagnostic, ExperimentConfig, Preset, ProblemSpec, ScheduleSpec, SetSpec, Severity};
pub use experiment::{run_experiment, ExperimentResult, Summary};
pub use output::write_outputs;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("run aborted: {0}")]
    Runtime(String),
}

impl RunnerError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 1,
            RunnerError::Io(_) | RunnerError::Runtime(_) => 2,
        }
    }
}
