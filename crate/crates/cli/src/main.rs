use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// SCG-based R-peak detection: synthesize data, train, infer and evaluate.
#[derive(Debug, Parser)]
#[command(name = "seismonet", version)]
struct Cli {
    /// Run configuration file (`section.key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic records and annotations to the data directory.
    Synth,
    /// Train a model on the records in the data directory.
    Train {
        /// Shorthand for `--set train.epochs=N`.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict the transform and R-peaks for one record.
    Infer { record: PathBuf },
    /// Score a checkpoint on the test split.
    Eval {
        /// Score the exact transform instead of model output.
        #[arg(long)]
        oracle: bool,
        /// Choose the valley prominence on the validation split first.
        #[arg(long, conflicts_with = "oracle")]
        tune: bool,
    },
    /// HRV indices from peak files.
    Hrv {
        #[arg(required = true)]
        peaks: Vec<PathBuf>,
        /// Value of the `source` column.
        #[arg(long, default_value = "ecg")]
        source: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bland-Altman agreement between SCG and ECG rows of an HRV file.
    Agree {
        hrv: PathBuf,
        /// One of mean_nn, sdnn, rmssd, pnn50; all when omitted.
        #[arg(long)]
        index: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> seismonet::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Command::Train { epochs: Some(n) } = cli.command {
        cfg.set("train.epochs", &n.to_string())?;
    }
    cfg.validate()?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Infer { record } => commands::infer(&cfg, &record),
        Command::Eval { oracle, tune } => commands::eval(&cfg, oracle, tune),
        Command::Hrv { peaks, source, out } => commands::hrv(&cfg, &peaks, &source, out.as_deref()),
        Command::Agree { hrv, index, out } => {
            commands::agree(&hrv, index.as_deref(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
