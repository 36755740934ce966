use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wiae::cli::{self, Command};

#[derive(Parser)]
#[command(name = "wiae", version, about = "Weak innovation autoencoder forecasting pipeline")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the configured series to series.csv.
    Generate(Common),
    /// Train a model and write model.json and losses.csv.
    Train(Common),
    /// Write the innovation sequence of the whole series.
    Extract(Common),
    /// Sample forecast trajectories from one origin.
    Forecast(Common),
    /// Score forecasts over the test split.
    Evaluate(Common),
    /// Runs test on the test-split innovations.
    Runstest(Common),
}

fn run(args: Args) -> anyhow::Result<()> {
    let (command, common) = match args.command {
        Cmd::Generate(c) => (Command::Generate, c),
        Cmd::Train(c) => (Command::Train, c),
        Cmd::Extract(c) => (Command::Extract, c),
        Cmd::Forecast(c) => (Command::Forecast, c),
        Cmd::Evaluate(c) => (Command::Evaluate, c),
        Cmd::Runstest(c) => (Command::Runstest, c),
    };
    let overrides = common
        .overrides
        .iter()
        .map(|s| cli::parse_override(s))
        .collect::<wiae::Result<Vec<_>>>()?;
    let config = cli::parse_config_with(&common.config, &overrides)
        .map_err(|e| anyhow::anyhow!("cli: {}: {e}", common.config.display()))?;
    for path in cli::run_pipeline(command, &config)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}
