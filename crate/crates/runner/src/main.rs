use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rfzo_runner::config::{example_configs, has_errors};
use rfzo_runner::{run_experiment, validate_config, write_outputs, ExperimentConfig, Preset, RunnerError};

#[derive(Parser)]
#[command(name = "rfzo", about = "Online zeroth-order optimization experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config's `out_dir`.
        #[arg(long, env = "RFZO_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the built-in example configs.
    ListPresets,
}

fn run(command: Command) -> Result<(), RunnerError> {
    match command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            preset,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(n) = trials {
                cfg.trials = n;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if preset.is_some() {
                cfg.preset = preset;
            }
            let dir = out
                .or_else(|| cfg.out_dir.clone())
                .ok_or_else(|| RunnerError::Config("no output directory: pass --out or set out_dir".into()))?;
            let result = run_experiment(&cfg)?;
            for d in &result.summary.diagnostics {
                eprintln!("{d}");
            }
            for s in &result.summary.skipped {
                eprintln!("skipped {}: {}", s.estimator, s.reason);
            }
            write_outputs(&result, &dir)?;
            for e in &result.summary.estimators {
                let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
                eprintln!(
                    "{:<24} eta={} final_regret={} final_abs_regret={} final_cost={}",
                    e.estimator.name(),
                    e.schedule.eta,
                    show(e.final_regret_mean),
                    show(e.final_abs_regret_mean),
                    show(e.final_window_cost_mean),
                );
            }
            let aborted: usize = result.summary.estimators.iter().map(|e| e.aborted.len()).sum();
            if aborted > 0 {
                return Err(RunnerError::Runtime(format!(
                    "{aborted} run(s) aborted; see summary.json"
                )));
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let diagnostics = validate_config(&cfg);
            for d in &diagnostics {
                println!("{d}");
            }
            if has_errors(&diagnostics) {
                return Err(RunnerError::Config("validation failed".into()));
            }
            if diagnostics.is_empty() {
                println!("ok");
            }
            Ok(())
        }
        Command::ListPresets => {
            for (name, description, cfg) in example_configs() {
                println!("# {name}: {description}");
                println!("{}", serde_json::to_string_pretty(&cfg).expect("json"));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
