use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use snext::harness::config::{parse_config, template};
use snext::harness::runner::run_experiment;

#[derive(Parser)]
#[command(name = "snext", about = "Distributed stochastic SCA experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration file.
    Run { config: PathBuf },
    /// Parse and validate a configuration file without running it.
    Validate { config: PathBuf },
    /// Print a starting-point configuration ("quadratic" or "nn").
    GenConfig { template: String },
}

fn execute(cli: Cli) -> snext::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)?;
            let config = parse_config(&text)?;
            let record = run_experiment(&config)?;
            let last = record.metrics.last().expect("at least the initial row");
            println!(
                "completed {} iterations of {}",
                last.iter,
                config.algorithm.name.as_str()
            );
            println!("train loss: {:.6e}", record.train_loss);
            if let Some(test) = record.test_loss {
                println!("test mse:   {test:.6e}");
            }
            println!("metrics:    {}", record.metrics_path.display());
            println!("checkpoint: {}", record.checkpoint_path.display());
        }
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)?;
            let config = parse_config(&text)?;
            println!("valid configuration:");
            print!("{}", config.to_toml()?);
        }
        Command::GenConfig { template: name } => {
            print!("{}", template(&name)?.to_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
