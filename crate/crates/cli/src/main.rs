//! `fscd`: clean tick data, simulate, fit, run the correctness harness and
//! summarize draws.

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fscd", version, about = "Flexible stochastic conditional duration model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Layers shared by every configurable command.
#[derive(Debug, Clone, Args)]
struct Layers {
    /// Preset name; looked up in $FSCD_CONFIG_DIR, then built in (gir, tsx).
    #[arg(long, default_value = "tsx")]
    preset: String,
    /// TOML file layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Aggregation {
    None,
    SameSecond,
    Gw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    All,
    Regular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TruthArg {
    /// Fixed parameters with a U-shaped diurnal pattern and heavy clustering.
    Desk,
    /// A draw from the prior.
    Prior,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a tick file and write its durations and descriptive statistics.
    Clean {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        layers: Layers,
        /// Aggregation applied after cleaning.
        #[arg(long, value_enum)]
        rule: Option<Aggregation>,
    },
    /// Simulate days of durations, one file per day.
    Simulate {
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        layers: Layers,
        #[arg(long, default_value_t = 1)]
        days: usize,
        #[arg(long, value_enum, default_value = "desk")]
        truth: TruthArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the trades as a tick file with records cleaning removes.
        #[arg(long)]
        ticks: bool,
    },
    /// Sample the posterior given duration files.
    Fit {
        /// Duration files; their days are fitted jointly.
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        layers: Layers,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Require durations recorded to the second.
        #[arg(long)]
        discrete: bool,
        #[arg(long = "J")]
        j: Option<usize>,
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Independent chains, run concurrently with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        chains: usize,
    },
    /// Run the joint-distribution correctness harness.
    Gir {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, default_value_t = 1_000_000)]
        sweeps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Offset added to the degrees of freedom of the tau conditional.
        #[arg(long, default_value_t = 0.0, hide = true)]
        tau_dof_bias: f64,
    },
    /// Tables and curve exports from a draw file.
    Summarize {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Configuration of the fit; defaults to config.toml beside the draws.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Upper end of the normalized-duration grid of the shape curves.
        #[arg(long, default_value_t = 30.0)]
        eps_max: f64,
        #[arg(long, default_value_t = 301)]
        points: usize,
    },
}

/// Failure of a command, reported as JSON on stderr.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub path: Option<String>,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            message: message.into(),
            path: None,
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self {
            kind: "flag-conflict",
            message: message.into(),
            path: None,
        }
    }

    pub fn missing(path: &Path) -> Self {
        Self {
            kind: "missing-file",
            message: format!("{} does not exist", path.display()),
            path: Some(path.display().to_string()),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            return Self::missing(path);
        }
        Self {
            kind: "io",
            message: e.to_string(),
            path: Some(path.display().to_string()),
        }
    }

    pub fn in_file(path: &Path, e: fscd::Error) -> Self {
        let mut err = Self::from(e);
        err.path = Some(path.display().to_string());
        err
    }

    fn report(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind, "message": self.message, "path": self.path }
        })
        .to_string()
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            "config" | "flag-conflict" | "parse" => 2,
            "missing-file" | "io" => 3,
            _ => 1,
        }
    }
}

impl From<fscd::Error> for CliError {
    fn from(e: fscd::Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
            path: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
