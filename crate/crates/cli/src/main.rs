//! `socrec`: train, query and evaluate social-regularized factorization models.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(name = "socrec", version, about = "Social-regularized matrix factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on every rating in `--ratings`.
    Train {
        #[arg(long, value_enum, default_value_t = TrainMethod::Mf)]
        method: TrainMethod,
        /// Model file to write; the id map goes to `<model>.ids` and the
        /// training report to `<model>.report.json`.
        #[arg(long, default_value = "model.txt")]
        model: std::path::PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the clamped prediction of a trained model for one user and item.
    Predict {
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
    },
    /// Run an experiment and write its CSVs to `--output-dir`.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMethod {
    Mf,
    Social,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Compare,
    AlphaSweep,
    Ablation,
    ColdStart,
    SimStudy,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Compare => "compare",
            Experiment::AlphaSweep => "alpha-sweep",
            Experiment::Ablation => "ablation",
            Experiment::ColdStart => "cold-start",
            Experiment::SimStudy => "sim-study",
        }
    }
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const DIVERGENCE: u8 = 3;

    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: Self::DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<socrec_core::Error> for CliError {
    fn from(e: socrec_core::Error) -> Self {
        use socrec_core::Error as E;
        let code = match e.root() {
            E::InvalidParameter(_) => Self::USAGE,
            E::Divergence { .. } => Self::DIVERGENCE,
            _ => Self::DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            method,
            model,
            config,
        } => commands::train(method, &model, &config),
        Command::Predict { model, user, item } => commands::predict(&model, &user, &item),
        Command::Experiment { which, config } => commands::experiment(which, &config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CliError::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
