use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use condensate_fp_cli::{parse_config, run_command, CliError, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "condensate-fp", version, about = "Superlinear Fokker-Planck experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, env = "CONDENSATE_FP_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and the validation suite.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Diffusion weights, steady-state profiles and critical constants.
    Stationary(Common),
    /// Time integration with blow-up detection.
    Evolve(Common),
    /// Blow-up mass thresholds and time bounds.
    Threshold(Common),
    /// Concurrent runs over one parameter axis.
    Sweep(Common),
    /// Property suite with a JSON report.
    Validate(Common),
}

fn execute(mode: Mode, common: Common) -> Result<Vec<PathBuf>, CliError> {
    let config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let mut config = config.resolve(mode)?;
    if let Some(out) = common.out {
        config.output_dir = out;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = common.workers {
        if k == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| CliError::Numerical(e.to_string()))?;
    let out = config.output_dir.clone();
    pool.install(|| run_command(mode, &config, &out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Stationary(c) => (Mode::Stationary, c),
        Command::Evolve(c) => (Mode::Evolve, c),
        Command::Threshold(c) => (Mode::Threshold, c),
        Command::Sweep(c) => (Mode::Sweep, c),
        Command::Validate(c) => (Mode::Validate, c),
    };
    match execute(mode, common) {
        Ok(files) => {
            eprintln!("wrote {} file(s)", files.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
