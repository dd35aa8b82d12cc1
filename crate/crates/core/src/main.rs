use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ngfield::app::{cmd_crossval, cmd_fit, cmd_predict, cmd_simulate, AppError, RunConfig, Transform};

#[derive(Parser)]
#[command(name = "ngfield", version, about = "Non-Gaussian SPDE random fields: simulate, fit, predict, cross-validate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    None,
    Sqrt,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON); for `predict`, the fitted model file
    #[arg(long)]
    config: PathBuf,
    /// Dataset CSV; for `predict`, the prediction locations
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    transform: TransformArg,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    Simulate(Common),
    Fit(Common),
    Predict(Common),
    Crossval(Common),
}

fn load_config(c: &Common) -> Result<(RunConfig, PathBuf), AppError> {
    let mut cfg = RunConfig::load(&c.config.display().to_string())?;
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output));
    Ok((cfg, out))
}

fn need_data(c: &Common) -> Result<&Path, AppError> {
    c.data.as_deref().ok_or_else(|| AppError::Config("--data is required".into()))
}

fn transform(c: &Common) -> Transform {
    match c.transform {
        TransformArg::None => Transform::None,
        TransformArg::Sqrt => Transform::Sqrt,
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate(c) => {
            let (cfg, out) = load_config(&c)?;
            cmd_simulate(&cfg, &out)?;
        }
        Command::Fit(c) => {
            let (cfg, out) = load_config(&c)?;
            let model = cmd_fit(&cfg, need_data(&c)?, transform(&c), &out)?;
            for w in &model.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Predict(c) => {
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
            cmd_predict(&c.config, c.data.as_deref(), c.seed, &out)?;
        }
        Command::Crossval(c) => {
            let (cfg, out) = load_config(&c)?;
            cmd_crossval(&cfg, need_data(&c)?, transform(&c), &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
