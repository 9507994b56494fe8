use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trps_cli::config::{Format, Task};
use trps_cli::{presets, run_to_dir, CliError, ExperimentConfig, Result};

/// Cavity-QED dynamics and time-resolved physical spectra.
#[derive(Parser)]
#[command(name = "trps", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Population dynamics from a config file.
    Dynamics(RunArgs),
    /// Time-resolved spectra from a config file.
    Spectrum(RunArgs),
    /// Parameter scan from a config file.
    Scan(RunArgs),
    /// Runtime scaling benchmark from a config file.
    Bench(RunArgs),
    /// Runs a named preset.
    Preset {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Checks a config and prints it with every default filled in.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (default: the config's output.dir, else out/<preset>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Worker threads for frequency and scan points.
    #[arg(long)]
    threads: Option<usize>,
    /// Asserts the run uses no random numbers (always true; kept for scripts).
    #[arg(long)]
    seedless: bool,
    /// Also write plot.py next to the data.
    #[arg(long)]
    plot_script: bool,
}

fn run_config(mut cfg: ExperimentConfig, common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::config("--threads", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    if common.seedless {
        log::info!("deterministic run: no random number generator is used");
    }
    match common.format.as_deref() {
        Some("json") => cfg.output.format = Format::Json,
        Some(_) => cfg.output.format = Format::Csv,
        None => {}
    }
    let dir = match (&common.out, &cfg.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => Path::new("out").join(&cfg.preset),
    };
    let result = run_to_dir(&cfg, &dir, common.plot_script)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} files to {}", result.tables.len() + 1 + usize::from(common.plot_script), dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let (task, args) = match cli.command {
        Command::Preset { name, common } => return run_config(presets::preset(&name)?, &common),
        Command::Validate { config } => {
            let resolved = ExperimentConfig::load(&config)?.resolve()?;
            print!("{}", resolved.to_toml());
            return Ok(());
        }
        Command::Dynamics(a) => (Task::Dynamics, a),
        Command::Spectrum(a) => (Task::Spectrum, a),
        Command::Scan(a) => (Task::Scan, a),
        Command::Bench(a) => (Task::Bench, a),
    };
    let cfg = ExperimentConfig::load(&args.config)?;
    if cfg.task != task {
        return Err(CliError::config(
            "task",
            format!("config is a {} task but the {} verb was used", cfg.task.name(), task.name()),
        ));
    }
    run_config(cfg, &args.common)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
