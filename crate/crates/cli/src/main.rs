mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use loadcnn::cost::{CostParams, DEFAULT_PUE, DEFAULT_TRIALS};
use loadcnn::gradsuite::{Fault, SUITE_TRIALS};
use loadcnn::metrics::NrmseRange;
use loadcnn::parallel::configure_threads;

use config::RunConfig;
use error::CliError;

/// Day-ahead residential load forecasting with a dual-channel 1-D CNN.
#[derive(Parser)]
#[command(name = "loadcnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic smart-meter dataset.
    Synth {
        #[arg(long)]
        customers: usize,
        #[arg(long)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; receives readings.txt and customers.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest, window, split and train; writes a checkpoint and logs.
    Train {
        /// Readings file, or a directory produced by `synth`.
        #[arg(long)]
        data: PathBuf,
        /// key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        test_days: Option<u32>,
        #[arg(long)]
        validation_days: Option<u32>,
        /// Power draw in watts for the cost report.
        #[arg(long)]
        power: Option<f64>,
        /// Any config key, as KEY=VALUE. Repeatable; applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score a checkpoint on the test split, next to the persistence baseline.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for eval_report.txt and eval_report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// actual | actual-max-predicted-min
        #[arg(long)]
        nrmse_range: Option<NrmseRange>,
        /// Predict each target exactly (harness check).
        #[arg(long, hide = true)]
        identity: bool,
    },
    /// Print 48 half-hourly predictions for one customer and day.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        customer: String,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        data: PathBuf,
    },
    /// Energy and CO2e cost of training.
    Cost {
        #[arg(long)]
        power: f64,
        #[arg(long)]
        hours: f64,
        #[arg(long, default_value_t = DEFAULT_PUE)]
        pue: f64,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long)]
        json: bool,
    },
    /// Finite-difference gradient checks for every layer and the model.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SUITE_TRIALS)]
        trials: usize,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
}

fn train_config(
    file: Option<&PathBuf>,
    pairs: &[(&str, Option<String>)],
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::default();
    if let Some(path) = file {
        c.apply_file(path)?;
    }
    for (key, value) in pairs {
        if let Some(v) = value {
            c.set(key, v)?;
        }
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
        c.set(k.trim(), v)?;
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { customers, days, seed, out } => commands::synth(customers, days, seed, &out),
        Command::Train {
            data,
            config,
            seed,
            out,
            epochs,
            batch_size,
            learning_rate,
            max_steps,
            test_days,
            validation_days,
            power,
            overrides,
        } => {
            let pairs = [
                ("seed", seed.map(|v| v.to_string())),
                ("max_epochs", epochs.map(|v| v.to_string())),
                ("batch_size", batch_size.map(|v| v.to_string())),
                ("learning_rate", learning_rate.map(|v| v.to_string())),
                ("max_steps", max_steps.map(|v| v.to_string())),
                ("test_days", test_days.map(|v| v.to_string())),
                ("validation_days", validation_days.map(|v| v.to_string())),
                ("power_watts", power.map(|v| v.to_string())),
            ];
            let rc = train_config(config.as_ref(), &pairs, &overrides)?;
            commands::train_cmd(&data, &rc, &out)
        }
        Command::Evaluate { checkpoint, data, out, nrmse_range, identity } => {
            commands::evaluate_cmd(&checkpoint, &data, out.as_deref(), nrmse_range, identity)
        }
        Command::Predict { checkpoint, customer, date, data } => {
            commands::predict_cmd(&checkpoint, &data, &customer, date)
        }
        Command::Cost { power, hours, pue, trials, json } => commands::cost_cmd(
            CostParams {
                power_watts: power,
                training_hours: hours,
                pue,
                trials,
            },
            json,
        ),
        Command::Gradcheck { seed, trials, inject_fault } => {
            commands::gradcheck_cmd(seed, trials, inject_fault)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
