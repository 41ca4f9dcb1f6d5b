//! `wdr`: simulate, fit, predict and evaluate Weibull delegate racing models.

mod commands;
mod config;
mod error;
mod model_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{KeySpec, Settings};
use error::CliError;

#[derive(Parser)]
#[command(name = "wdr", version, about = "Competing-risks survival analysis with Weibull delegate racing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic competing-risks dataset.
    Simulate(SimulateArgs),
    /// Fit a model by MCMC or MAP.
    Fit(FitArgs),
    /// Predict cumulative incidence curves or event-type probabilities.
    Predict(PredictArgs),
    /// Score predictions on a labelled test set.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct Common {
    /// key = value settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scenario: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    censor_time: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Training CSV.
    #[arg(long)]
    data: Option<String>,
    /// Output prefix.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// mcmc or map.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    n_risks: Option<usize>,
    /// Whether to prepend an intercept column (true/false).
    #[arg(long)]
    intercept: Option<bool>,
    /// Categorical columns as column:baseline, comma-separated.
    #[arg(long)]
    categorical: Option<String>,
    /// Sub-events per event type.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Independent chains run concurrently; outputs are suffixed by chain id.
    #[arg(long)]
    chains: Option<usize>,
    /// 200,000 sweeps with 195,000 burn-in.
    #[arg(long)]
    paper_scale: bool,
    /// permanent, revivable or off.
    #[arg(long)]
    pruning: Option<String>,
    /// Include coefficients in the trace.
    #[arg(long)]
    trace_beta: bool,
    /// Monte-Carlo draws per observation (MAP).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    minibatch: Option<usize>,
    /// sgd or adagrad.
    #[arg(long)]
    optimizer: Option<String>,
    /// l2, gamma_sparse or gamma_unit.
    #[arg(long)]
    prior_r: Option<String>,
    /// Student-t degrees of freedom of the coefficient prior (MAP).
    #[arg(long)]
    dof: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<String>,
    /// Model files (draws .ndjson or MAP .json), comma-separated.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Evaluation times, comma-separated.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-row event-type probabilities instead of CIF curves.
    #[arg(long)]
    event_probability: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Collects the flags that were given as `(key, value)` pairs.
macro_rules! flags {
    ($args:expr; $($field:ident),* ; $($switch:ident),*) => {{
        let mut v: Vec<(&str, String)> = Vec::new();
        $( if let Some(x) = &$args.$field { v.push((stringify!($field), x.to_string())); } )*
        $( if $args.$switch { v.push((stringify!($switch), "true".to_string())); } )*
        v
    }};
}

fn settings(command: &str, keys: &[KeySpec], common: &Common, flags: Vec<(&str, String)>) -> Result<Settings, CliError> {
    Settings::resolve(command, keys, common.config.as_deref(), flags)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let f = flags!(a; scenario, n, seed, out, censor_time;);
            commands::simulate(&mut settings("simulate", commands::SIMULATE_KEYS, &a.common, f)?)
        }
        Command::Fit(a) => {
            let f = flags!(a; data, out, seed, method, n_risks, intercept, categorical, k, iters, burnin,
                thin, chains, pruning, m, epochs, lr, minibatch, optimizer, prior_r, dof; paper_scale, trace_beta);
            commands::fit(&mut settings("fit", commands::FIT_KEYS, &a.common, f)?)
        }
        Command::Predict(a) => {
            let f = flags!(a; data, model, out, grid, n_mc, seed; event_probability);
            commands::predict(&mut settings("predict", commands::PREDICT_KEYS, &a.common, f)?)
        }
        Command::Evaluate(a) => {
            let f = flags!(a; data, model, out, grid, n_mc, seed;);
            commands::evaluate(&mut settings("evaluate", commands::EVALUATE_KEYS, &a.common, f)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
