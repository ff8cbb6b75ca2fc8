//! `gbic`: spectra, dynamics and entangled-state protocols for giant atoms
//! on a coupled-resonator waveguide.
//!
//! Exit status: 0 on success, 1 for invalid input or configuration,
//! 2 when a numerical check fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gbic", version, about = "Giant-atom bound states in the continuum")]
struct Cli {
    /// TOML run configuration; defaults describe the braided pair.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set drive.eta=0.05`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Eigenvalues and state classes over `experiment.g_grid`.
    Spectrum,
    /// Classify the spectrum and report the BIC and its fidelity.
    Bic,
    /// Disorder-averaged BIC fidelity over `disorder.delta_grid`.
    Disorder,
    /// Master-equation trajectory from `experiment.initial`.
    Evolve,
    /// Bell-state drive protocol.
    Bell,
    /// W-state drive protocol.
    Wstate,
    /// Exact versus Markovian decay of a single atom.
    Calibrate,
    /// Write the dataset of one figure.
    Figure {
        /// fig2a, fig2b, fig3, fig4a, fig4b, fig5a, fig5b, fig6b or fig6c
        name: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Bic => "bic",
            Command::Disorder => "disorder",
            Command::Evolve => "evolve",
            Command::Bell => "bell",
            Command::Wstate => "wstate",
            Command::Calibrate => "calibrate",
            Command::Figure { .. } => "figure",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    match commands::run(&cli.command, cli.config.as_deref(), &overrides, &cli.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
