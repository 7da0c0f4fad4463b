//! `racovert` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 configuration
//! error, 3 infeasible run.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use racovert_core::error::Error as CoreError;

pub mod commands;
pub mod config;
pub mod figures;
pub mod output;

use config::{
    KeySpec, RunConfig, FIGURE_KEYS, MINDIST_KEYS, PREIMAGE_KEYS, REPETITION_KEYS, SIMULATE_KEYS,
    SWEEP_EXTRA_KEYS,
};
use figures::Figure;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible run: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(CoreError),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Infeasible(_) | CoreError::BudgetExhausted { .. } | CoreError::ExhaustiveCap { .. } => {
                CliError::Infeasible(e.to_string())
            }
            CoreError::Malformed(_) => CliError::Core(e),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "racovert", version, about = "Covert channels in RA contention resolution and their obfuscation remediations")]
pub struct Cli {
    /// Output file (stdout when omitted). Written atomically.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Plain-text key=value file; `#` starts a comment.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Extra key=value override, repeatable; wins over the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit figure data as CSV.
    Figure {
        #[arg(value_parser = parse_figure)]
        name: Figure,
    },
    /// Run a covert session and write a JSON report.
    Simulate,
    /// Run an adversary strategy and its countermeasure.
    AttackDemo { mode: AttackMode },
    /// Repeat `simulate` over a list of values for one key; CSV output.
    Sweep {
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackMode {
    Preimage,
    Repetition,
    Mindist,
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

impl Cli {
    fn resolve(&self, specs: &[KeySpec], extra: &[(&str, Option<String>)]) -> Result<RunConfig, CliError> {
        let mut flags = vec![("seed", self.seed.map(|s| s.to_string()))];
        if specs.iter().any(|k| k.name == "trials") {
            flags.push(("trials", self.trials.map(|t| t.to_string())));
        } else if self.trials.is_some() {
            return Err(CliError::Config("--trials does not apply to this command".into()));
        }
        flags.extend(extra.iter().cloned());
        RunConfig::resolve(specs, self.config.as_deref(), &self.sets, &flags)
    }

    /// Resolves the configuration and renders the command's output bytes.
    pub fn render(&self) -> Result<Vec<u8>, CliError> {
        match &self.command {
            Command::Figure { name } => {
                let cfg = self.resolve(FIGURE_KEYS, &[])?;
                figures::figure_table(*name)?.to_csv(&format!("figure {name}"), &cfg)
            }
            Command::Simulate => {
                let cfg = self.resolve(SIMULATE_KEYS, &[])?;
                output::to_json("simulate", &cfg, &commands::simulate(&cfg)?)
            }
            Command::AttackDemo { mode } => {
                let (specs, name) = match mode {
                    AttackMode::Preimage => (PREIMAGE_KEYS, "attack-demo preimage"),
                    AttackMode::Repetition => (REPETITION_KEYS, "attack-demo repetition"),
                    AttackMode::Mindist => (MINDIST_KEYS, "attack-demo mindist"),
                };
                let cfg = self.resolve(specs, &[])?;
                match mode {
                    AttackMode::Preimage => output::to_json(name, &cfg, &commands::preimage(&cfg)?),
                    AttackMode::Repetition => output::to_json(name, &cfg, &commands::repetition(&cfg)?),
                    AttackMode::Mindist => output::to_json(name, &cfg, &commands::mindist(&cfg)?),
                }
            }
            Command::Sweep { param, values } => {
                let specs: Vec<KeySpec> = SIMULATE_KEYS.iter().chain(SWEEP_EXTRA_KEYS).copied().collect();
                let cfg = self.resolve(&specs, &[("param", param.clone()), ("values", values.clone())])?;
                commands::sweep(&cfg)?.to_csv("sweep", &cfg)
            }
        }
    }

    pub fn run(&self) -> Result<(), CliError> {
        let bytes = self.render()?;
        output::emit(self.out.as_deref(), &bytes)
    }
}
