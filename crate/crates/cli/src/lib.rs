//! Experiment runner behind the `enzyme-net` binary: JSON configs in,
//! CSV tables and a JSON fit report out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "enzyme-net", version, about = "Single-enzyme correlation analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Continuum parameters fitted to beta-galactosidase data, with
    /// turnover curves at 20 and 100 uM and intensity curves at 20, 100
    /// and 380 uM.
    #[value(name = "paper2012")]
    Paper2012,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Fit synthetic curves generated from known parameters.
    #[arg(long)]
    pub synthetic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary law, passage quantities and analytic correlations.
    Analyze(CommonArgs),
    /// Gillespie simulation with an empirical-vs-analytic comparison.
    Simulate(CommonArgs),
    /// Fast-reset convergence study and concentration sweeps.
    Scenarios(CommonArgs),
    /// Continuum-model fit to correlation curves.
    Fit(CommonArgs),
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Analyze(a) | Command::Simulate(a) | Command::Scenarios(a) | Command::Fit(a) => a,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Simulate(_) => "simulate",
            Command::Scenarios(_) => "scenarios",
            Command::Fit(_) => "fit",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] enzyme_net::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for config and input errors, 3 for violated preconditions, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        use enzyme_net::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidSpec(_) | E::InvalidArgument(_) | E::Parse(_) | E::Io(_) => 2,
                E::Reducible(_) | E::Precondition(_) => 3,
                E::Singular { .. }
                | E::Defective { .. }
                | E::NullSpaceDimension { .. }
                | E::MatchingAmbiguity(_)
                | E::Numerical(_)
                | E::IterationCap { .. } => 4,
            },
        }
    }
}
