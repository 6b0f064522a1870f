//! Desk-scale experiments on the dressed-pair simulator.
//!
//! Each subcommand loads a TOML config (a built-in scenario when `--config`
//! is omitted), runs the corresponding simulated experiment, and writes CSV
//! curves plus a JSON summary into `--out`.
//!
//! Exit status: 0 on success, 1 for config errors, 2 for numerical or
//! extraction errors.

mod config;
mod output;
mod runners;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use runners::Context;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(#[from] spinflip::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(_) | CliError::Output(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "spinflip",
    version,
    about = "Two-atom Rydberg-dressed spin experiments: interaction curves, \
             spectroscopy, blockaded Rabi, Bell states, lifetime, recapture"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; defaults to the subcommand's built-in scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Escalate soft precondition warnings to errors.
    #[arg(long, global = true)]
    strict: bool,

    /// Override the config's Monte Carlo shot count.
    #[arg(long, global = true)]
    shots: Option<usize>,

    /// Worker-thread cap; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
enum Command {
    /// Interaction strength J versus interatomic distance.
    Jcurve,
    /// Microwave spectroscopy scan with peak fitting and J extraction.
    Scan,
    /// Blockaded Rabi oscillations with the √2 collective enhancement.
    Rabi,
    /// Bell-state preparation, parity scan, and fidelity bounds.
    Bell,
    /// Two-pulse Rydberg lifetime measurement with exponential fit.
    Lifetime,
    /// Release-and-recapture Monte Carlo.
    Recapture,
}

impl Command {
    fn builtin_config(self) -> &'static str {
        match self {
            Command::Jcurve => include_str!("../../../configs/jcurve.toml"),
            Command::Scan => include_str!("../../../configs/scan.toml"),
            Command::Rabi => include_str!("../../../configs/rabi.toml"),
            Command::Bell => include_str!("../../../configs/bell.toml"),
            Command::Lifetime => include_str!("../../../configs/lifetime.toml"),
            Command::Recapture => include_str!("../../../configs/recapture.toml"),
        }
    }
}

fn main() -> ExitCode {
    // The BLAS backend must stay single-threaded so results are
    // byte-identical at any --threads setting.
    std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    std::env::set_var("OMP_NUM_THREADS", "1");

    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?,
        None => cli.command.builtin_config().to_string(),
    };
    let mut cfg = Config::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(shots) = cli.shots {
        if let Some(rc) = cfg.rabi.as_mut() {
            rc.shots = shots;
        }
        if let Some(bc) = cfg.bell.as_mut() {
            bc.shots = shots;
        }
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", cli.out.display())))?;
    let ctx = Context {
        out_dir: &cli.out,
        strict: cli.strict,
    };
    match cli.command {
        Command::Jcurve => runners::jcurve(&cfg, &ctx),
        Command::Scan => runners::scan(&cfg, &ctx),
        Command::Rabi => runners::rabi(&cfg, &ctx),
        Command::Bell => runners::bell(&cfg, &ctx),
        Command::Lifetime => runners::lifetime(&cfg, &ctx),
        Command::Recapture => runners::recapture(&cfg, &ctx),
    }
}
