use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tauquant_cli::{run, CliError, Command, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "tauquant", version, about = "Chernoff approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides `out` in the config, stdout when neither is set
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Chernoff iterates against a reference over `n_sweep`
    Converge(Common),
    /// Gaps between quantizations and the transformed symbol
    TauCompare(Common),
    /// Monte Carlo estimates against the grid solution
    McValidate(Common),
    /// Empirical L1 growth rate of the iterates
    NormGrowth(Common),
    /// Phase-space integrals against the Chernoff iterates
    HffCheck(Common),
}

fn execute(command: Command, common: &Common) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let exp = cfg.validate()?;
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let csv = run(command, &exp)?.to_csv();
    match common.out.as_ref().or(exp.out.as_ref()) {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Sub::Converge(c) => (Command::Converge, c),
        Sub::TauCompare(c) => (Command::TauCompare, c),
        Sub::McValidate(c) => (Command::McValidate, c),
        Sub::NormGrowth(c) => (Command::NormGrowth, c),
        Sub::HffCheck(c) => (Command::HffCheck, c),
    };
    match execute(command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
