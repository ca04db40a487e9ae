mod commands;
mod config;
mod store;

use clap::Parser;
use commands::Subcommand;
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;
use store::{Opened, RunDir};

#[derive(Parser, Debug)]
#[command(name = "stochwave", version, about = "Simulation and hitting analysis for stochastic wave equations")]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Recompute even if a finished run with the same id exists.
    #[arg(long)]
    force: bool,
    /// Worker threads; overrides `workers` in the config.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<stochwave::Error>() {
        Some(err) if err.is_validation() => 2,
        Some(err) if err.is_convergence() => 3,
        _ => 1,
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&cli.config)?;
    let workers = cli.workers.or(cfg.workers);
    if workers == Some(0) {
        return Err(ConfigError("workers: must be at least 1".into()).into());
    }
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    commands::validate(&cfg, cli.command)?;
    let canonical = commands::canonical(&cfg, cli.command);
    let id = store::run_id(&canonical);
    let root = store::output_root(cfg.output_dir.as_deref());
    let name = cli.command.name();
    let mut dir = match RunDir::open(&root, name, &id, cli.force)? {
        Opened::Cached(path) => {
            println!("cached {id} {}", path.display());
            return Ok(());
        }
        Opened::Fresh(dir) => dir,
    };
    if cli.verbose {
        eprintln!("{name} run {id} -> {}", dir.path.display());
    }
    let summary = commands::run(&cfg, cli.command, &mut dir, cli.verbose)?;
    let path = dir.finish(name, &canonical)?;
    println!("{summary}");
    println!("run {id} {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
