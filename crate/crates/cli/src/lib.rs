//! Command-line driver: configuration, experiments and artifact output.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

pub use artifacts::RunManifest;
pub use config::{Backend, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "anyon", version, about = "Toric-code anyon braiding on a simulated four-qubit device")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat TOML configuration (GHz, ns).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub backend: Option<Backend>,

    /// `off`, or a noise/calibration JSON file written by `calibrate`.
    #[arg(long, global = true)]
    pub noise: Option<String>,

    /// Shots per tomography setting or gamma point; 0 for exact probabilities.
    #[arg(long, global = true)]
    pub shots: Option<u64>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Number of gamma points on [0, pi].
    #[arg(long, global = true)]
    pub gammas: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Subcommand)]
pub enum Command {
    /// Prepare the GHZ ground state, optionally with tomography.
    Ghz,
    /// GHZ state with an e anyon created by Z' on the first qubit.
    EAnyon,
    /// The three loop experiments with parity scans and cosine fits.
    Braid,
    /// Single-qubit Ramsey sweep and envelope fit (pulse level).
    Ramsey,
    /// Bisect t2eff to a target GHZ fidelity (pulse level).
    Calibrate {
        #[arg(long)]
        target: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ghz => "ghz",
            Command::EAnyon => "e-anyon",
            Command::Braid => "braid",
            Command::Ramsey => "ramsey",
            Command::Calibrate { .. } => "calibrate",
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<RunManifest> {
    commands::run(cli)
}
