use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use levyhj_cli::{parse_config, run, CliError, Command};

/// Run one levyhj experiment from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "levyhj", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the CSV and any extra outputs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = parse_config(&args.config)
        .map_err(CliError::from)
        .and_then(|cfg| run(args.command, &cfg, &args.out));
    match result {
        Ok(outcome) => {
            if !args.quiet {
                println!("{}: wrote {}", args.command.name(), outcome.csv.display());
                println!("{}", outcome.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("levyhj {}: {e}", args.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
