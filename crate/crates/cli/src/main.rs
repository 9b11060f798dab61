use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;

use spde_drift::asymptotics::standardize;
use spde_drift::harness::{run_experiment, ExperimentConfig, CONFIG_KEYS};
use spde_drift::model::NoiseLevel;
use spde_drift::observations::FieldObservations;
use spde_drift::pipeline::estimate;
use spde_drift::Error;

const EFFECTIVE_CONFIG_FILE: &str = "config.json";
const DEFAULT_OUTPUT_DIR: &str = "spde-drift-out";

fn config_help() -> String {
    let mut text = String::from("Config keys (JSON file or --set key=value):\n");
    for (key, meaning) in CONFIG_KEYS {
        text.push_str(&format!("  {key:<24} {meaning}\n"));
    }
    text.push_str("\nExit codes: 2 configuration, 3 estimation, 4 I/O.");
    text
}

/// Simulate a linear parabolic SPDE with small noise and estimate its drift.
#[derive(Debug, Parser)]
#[command(name = "spde-drift", version, after_help = config_help())]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config; its keys overlay the chosen base profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, applied after the file; repeatable, last wins.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Directory for all outputs.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads for experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Start from the full-scale profile instead of the desk-scale one.
    #[arg(long, global = true)]
    full_scale: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one replicate and write its observation slices as CSV.
    #[command(after_help = config_help())]
    Simulate {
        /// Replicate index (selects the random stream).
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Estimate (θ1, θ2, θ0) from saved observations, or from a fresh simulation.
    #[command(after_help = config_help())]
    Estimate {
        /// Directory holding site_columns.csv and time_rows.csv.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Run the Monte-Carlo study and write replicates, summary and diagnostics.
    #[command(after_help = config_help())]
    Experiment,
    /// Print the limit-law constants for the configured true parameter.
    #[command(after_help = config_help())]
    Asymptotics,
}

struct Failure {
    code: u8,
    kind: &'static str,
    error: Error,
}

fn classify(error: Error) -> Failure {
    let (code, kind) = match &error {
        Error::Config(_) | Error::Resource { .. } => (2, "config"),
        Error::Io { .. } | Error::Parse { .. } => (4, "io"),
        Error::Domain(_) | Error::Optimizer(_) | Error::Numerical(_) => (3, "estimation"),
    };
    Failure { code, kind, error }
}

/// Errors raised while reading or checking the configuration are
/// configuration errors unless they come from the file system.
fn config_failure(error: Error) -> Failure {
    match error {
        Error::Io { .. } | Error::Parse { .. } => classify(error),
        other => Failure {
            code: 2,
            kind: "config",
            error: other,
        },
    }
}

/// `run_experiment` reports configuration warnings itself.
fn load_config(common: &Common, report_warnings: bool) -> Result<ExperimentConfig, Failure> {
    let mut config = if common.full_scale {
        ExperimentConfig::full_scale()
    } else {
        ExperimentConfig::default()
    };
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| config_failure(Error::io(path, e)))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            config_failure(Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })
        })?;
        config = config.merge_json(&value).map_err(config_failure)?;
    }
    for assignment in &common.overrides {
        config = config.with_override(assignment).map_err(config_failure)?;
        log::info!("override {assignment}");
    }
    if let Some(dir) = &common.output_dir {
        config.output_dir = Some(dir.clone());
    }
    let warnings = config.validate().map_err(config_failure)?;
    if report_warnings {
        for warning in warnings {
            log::warn!("{warning}");
        }
    }
    Ok(config)
}

fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| classify(Error::Numerical(e.to_string())))?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| classify(Error::io(parent, e)))?;
    }
    std::fs::write(path, text + "\n").map_err(|e| classify(Error::io(path, e)))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = load_config(&cli.common, !matches!(cli.command, Command::Experiment))?;
    match cli.command {
        Command::Simulate { rep } => {
            let dir = output_dir(&config);
            config.output_dir = Some(dir.clone());
            write_json(&dir.join(EFFECTIVE_CONFIG_FILE), &config)?;
            let (obs, warnings) = config.simulate(rep).map_err(classify)?;
            obs.write_csv(&dir).map_err(classify)?;
            print_json(&json!({
                "output_dir": dir,
                "rep": rep,
                "sites": obs.sites.len(),
                "time_rows": obs.time_rows.len(),
                "warnings": warnings,
            }));
        }
        Command::Estimate { input, rep } => {
            let dir = output_dir(&config);
            config.output_dir = Some(dir.clone());
            write_json(&dir.join(EFFECTIVE_CONFIG_FILE), &config)?;
            let (obs, mut warnings) = match &input {
                Some(path) => (FieldObservations::read_csv(path).map_err(classify)?, Vec::new()),
                None => config.simulate(rep).map_err(classify)?,
            };
            let eps = NoiseLevel::new(obs.epsilon).map_err(classify)?;
            let fit = estimate(&obs, eps, &config.estimator).map_err(classify)?;
            warnings.extend(fit.warnings.iter().cloned());
            let z = standardize(&fit.estimates, &config.theta_star, obs.time_steps, obs.sites.len(), obs.epsilon);
            let report = json!({
                "estimates": fit.estimates,
                "sigma0_sq_hat": fit.sigma0_sq_hat,
                "eta_hat": fit.eta_hat,
                "contrast_value": fit.contrast_value,
                "loglik_value": fit.loglik_value,
                "standardized": z,
                "warnings": warnings,
                "source": input.map_or_else(|| format!("simulated rep {rep}"), |p| p.display().to_string()),
            });
            write_json(&dir.join("estimate.json"), &report)?;
            print_json(&report);
        }
        Command::Experiment => {
            let dir = output_dir(&config);
            config.output_dir = Some(dir.clone());
            write_json(&dir.join(EFFECTIVE_CONFIG_FILE), &config)?;
            let outcome = run_experiment(&config, cli.common.threads).map_err(classify)?;
            let s = &outcome.summary;
            print_json(&json!({
                "output_dir": dir,
                "replicates": s.replicates,
                "failures": s.failures,
                "mean": [s.theta1.mean, s.theta2.mean, s.theta0.mean],
                "sd": [s.theta1.sd, s.theta2.sd, s.theta0.sd],
            }));
        }
        Command::Asymptotics => {
            let report = config.asymptotics().map_err(classify)?;
            if let Some(dir) = &config.output_dir {
                write_json(&dir.join("asymptotics.json"), &report)?;
            }
            print_json(&serde_json::to_value(&report).map_err(|e| classify(Error::Numerical(e.to_string())))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "{}",
                json!({ "error": f.kind, "exit_code": f.code, "message": f.error.to_string() })
            );
            ExitCode::from(f.code)
        }
    }
}
