use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use throwcatch::config::Experiment;
use throwcatch_cli::{exit_code, run, RunRequest};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Use the experiment named in the configuration.
    Run,
    Pattern,
    SweepPhi,
    SweepTime,
    KickError,
    MassSpread,
    Recapture,
    Reentry,
}

impl Command {
    fn experiment(self) -> Option<Experiment> {
        match self {
            Command::Run => None,
            Command::Pattern => Some(Experiment::Pattern),
            Command::SweepPhi => Some(Experiment::SweepPhi),
            Command::SweepTime => Some(Experiment::SweepTime),
            Command::KickError => Some(Experiment::KickError),
            Command::MassSpread => Some(Experiment::MassSpread),
            Command::Recapture => Some(Experiment::Recapture),
            Command::Reentry => Some(Experiment::Reentry),
        }
    }
}

/// Fringe patterns, visibility sweeps, Monte-Carlo ensembles and recapture estimates for a
/// throw-and-catch nanoparticle Talbot-Lau interferometer.
#[derive(Debug, Parser)]
#[command(name = "throwcatch", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset to start from: silica-1e6 or silica-1e8.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the ensemble and re-entry runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration value, e.g. --set flight.kick_error=0.1
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; defaults to one per core.
    #[arg(long, env = "THROWCATCH_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let request = RunRequest {
        experiment: cli.command.experiment(),
        config: cli.config,
        preset: cli.preset,
        out: cli.out,
        seed: cli.seed,
        overrides: cli.overrides,
    };
    match run(&request) {
        Ok(manifest) => {
            for f in &manifest.files {
                println!("{}", request.out.join(&f.name).display());
            }
            println!("{}", request.out.join(throwcatch_cli::MANIFEST).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
